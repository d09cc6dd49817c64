from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

DEFAULT_CHUNK = 8192


def thread_count(threads: int | None = None) -> int:
    """Explicit value, else CURVLAB_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("CURVLAB_THREADS", "").strip()
        threads = int(env) if env.isdigit() else 1
    return max(1, int(threads))


def map_chunks(
    fn: Callable[..., tuple],
    arrays: Sequence[np.ndarray],
    threads: int | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> tuple:
    """Apply ``fn`` to aligned row-chunks of ``arrays`` and concatenate results.

    Chunk boundaries do not depend on the thread count and results are joined
    in chunk order, so the output is identical for any number of workers.
    """
    total = len(arrays[0]) if arrays else 0
    bounds = [(i, min(i + chunk, total)) for i in range(0, total, chunk)]
    if not bounds:
        return ()

    def run(b):
        lo, hi = b
        return fn(*(a[lo:hi] for a in arrays))

    workers = thread_count(threads)
    if workers == 1 or len(bounds) == 1:
        parts = [run(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    return tuple(np.concatenate(col) for col in zip(*parts))
