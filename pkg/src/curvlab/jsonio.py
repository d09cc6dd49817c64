"""Deterministic JSON output with a metadata sidecar for run-dependent fields."""

from __future__ import annotations

import dataclasses
import datetime as _dt
import json
import math
import platform
from pathlib import Path

import numpy as np

from .errors import POS_INF, ConfigError

SCHEMA_VERSION = 1


def jsonable(obj):
    """Recursively convert to plain JSON types. Non-finite floats become
    ``{"sentinel": "+inf" | "-inf"}`` or null (NaN)."""
    if obj is POS_INF:
        return POS_INF.to_json()
    if hasattr(obj, "to_dict") and not isinstance(obj, dict):
        return jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return {"sentinel": "+inf" if x > 0 else "-inf"}
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def sidecar_path(path: Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_json(path, obj, meta: dict | None = None) -> Path:
    """Write ``obj`` (plus ``schema_version``) to ``path``. ``meta`` goes to
    the ``<stem>.meta.json`` sidecar together with a UTC timestamp, so the
    main file is a pure function of the inputs."""
    path = Path(path)
    body = jsonable(obj)
    if isinstance(body, dict):
        body = {"schema_version": SCHEMA_VERSION, **body}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n")
    side = {
        "schema_version": SCHEMA_VERSION,
        "written_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    side.update(meta or {})
    sidecar_path(path).write_text(dumps(side))
    return path


def read_json(path) -> dict:
    """Load a JSON object; malformed or missing files raise ConfigError."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data
