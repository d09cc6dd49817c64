"""Elementary symmetric polynomials, their derivatives and Garding cones.

Every evaluation goes through the O(nk) column recurrence

    e_j(x_1..x_m) = e_j(x_1..x_{m-1}) + x_m e_{j-1}(x_1..x_{m-1}),

applied to the entries sorted in descending order, so that the result is
bit-identical under permutations of the input. All functions broadcast over
leading axes: a ``(..., n)`` array is treated as a batch of curvature vectors.
Index arguments are 0-based and refer to the array exactly as passed in.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import POS_INF, DomainError, PreconditionError, SamplerStarvation

REL_TOL = 1e-10


def tolerance(lhs, rhs):
    """Absolute slack allowed when checking ``lhs >= rhs`` in floating point."""
    return REL_TOL * np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))


@dataclass(frozen=True, eq=False)
class PrincipalCurvatures:
    """A curvature vector stored in descending order.

    ``order`` records the permutation applied to the caller's vector, i.e.
    ``values == original[order]``.
    """

    values: np.ndarray
    order: np.ndarray

    @classmethod
    def from_values(cls, kappa: Sequence[float] | np.ndarray) -> "PrincipalCurvatures":
        arr = np.asarray(kappa, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise DomainError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError("curvature entries must be finite")
        order = np.argsort(-arr, kind="stable")
        values = arr[order]
        values.setflags(write=False)
        order.setflags(write=False)
        return cls(values=values, order=order)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def original(self) -> np.ndarray:
        """The vector in the caller's original ordering."""
        out = np.empty_like(self.values)
        out[self.order] = self.values
        return out

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"PrincipalCurvatures({np.array2string(self.values, precision=6)})"


def _as_array(kappa) -> np.ndarray:
    if isinstance(kappa, PrincipalCurvatures):
        return kappa.values
    arr = np.asarray(kappa, dtype=float)
    if arr.ndim == 0:
        raise DomainError("curvature input must have at least one axis")
    return arr


def _sorted_desc(K: np.ndarray) -> np.ndarray:
    return -np.sort(-K, axis=-1)


def elementary(kappa, kmax: int | None = None, *, presorted: bool = False) -> np.ndarray:
    """Return ``[sigma_0, ..., sigma_kmax]`` along a new last axis."""
    K = _as_array(kappa)
    n = K.shape[-1]
    kmax = n if kmax is None else int(kmax)
    if not presorted:
        K = _sorted_desc(K)
    batch = K.shape[:-1]
    # batch-contiguous layout; the recurrence is the same, term for term
    Kt = np.ascontiguousarray(K.reshape(int(np.prod(batch, dtype=int)), n).T)
    e = np.zeros((kmax + 1, Kt.shape[1]))
    e[0] = 1.0
    for j in range(n):
        top = min(j + 1, kmax)
        if top == 0:
            break
        e[1 : top + 1] += Kt[j] * e[0:top]
    return e.T.reshape(batch + (kmax + 1,))


def _elementary_exact(values: Iterable, kmax: int) -> list[Fraction]:
    e = [Fraction(1)] + [Fraction(0)] * kmax
    for x in values:
        x = Fraction(x)
        for j in range(kmax, 0, -1):
            e[j] += x * e[j - 1]
    return e


def _exact_values(kappa) -> list[Fraction]:
    """Entries as rationals, sorted descending; floats convert exactly."""
    if isinstance(kappa, PrincipalCurvatures):
        kappa = kappa.values
    if np.ndim(kappa) != 1:
        raise DomainError("exact mode takes a single vector")
    return sorted((Fraction(x) for x in list(kappa)), reverse=True)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def sigma(kappa, k: int, *, exact: bool = False):
    """k-th elementary symmetric polynomial of ``kappa``.

    With ``exact=True`` the entries (floats, ints or Fractions) are converted
    to rationals, floats exactly, and a ``Fraction`` is returned; only 1-D
    inputs are accepted.
    """
    if exact:
        vals = _exact_values(kappa)
        if not 0 <= k <= len(vals):
            raise DomainError(f"k={k} outside 0..{len(vals)}")
        return _elementary_exact(vals, k)[k]
    K = _as_array(kappa)
    n = K.shape[-1]
    if not 0 <= k <= n:
        raise DomainError(f"k={k} outside 0..{n}")
    return _scalar(elementary(K, k)[..., k])


def _check_excluded(n: int, excluded: Iterable[int]) -> list[int]:
    idx = [int(i) for i in excluded]
    if len(set(idx)) != len(idx):
        raise DomainError(f"excluded indices overlap: {idx}")
    for i in idx:
        if not 0 <= i < n:
            raise DomainError(f"excluded index {i} outside 0..{n - 1}")
    return idx


def sigma_restricted(kappa, k: int, excluded: Iterable[int], *, exact: bool = False):
    """sigma_k of ``kappa`` with the entries at ``excluded`` removed."""
    if exact:
        if isinstance(kappa, PrincipalCurvatures):
            kappa = kappa.values
        if np.ndim(kappa) != 1:
            raise DomainError("exact mode takes a single vector")
        vals = list(kappa)
        idx = _check_excluded(len(vals), excluded)
        if not 0 <= k <= len(vals) - len(idx):
            raise DomainError(f"k={k} outside 0..{len(vals) - len(idx)} after removing {len(idx)} entries")
        return sigma([v for j, v in enumerate(vals) if j not in idx], k, exact=True)
    K = _as_array(kappa)
    n = K.shape[-1]
    idx = _check_excluded(n, excluded)
    if not 0 <= k <= n - len(idx):
        raise DomainError(f"k={k} outside 0..{n - len(idx)} after removing {len(idx)} entries")
    rest = np.delete(K, idx, axis=-1)
    return _scalar(elementary(rest, k)[..., k])


def sigma_grad(kappa, k: int) -> np.ndarray:
    """Gradient of sigma_k: component i is sigma_{k-1}(kappa | i)."""
    K = _as_array(kappa)
    n = K.shape[-1]
    if not 1 <= k <= n:
        raise DomainError(f"k={k} outside 1..{n}")
    out = np.empty(K.shape)
    for i in range(n):
        out[..., i] = elementary(np.delete(K, i, axis=-1), k - 1)[..., k - 1]
    return out


def sigma_hess(kappa, k: int) -> np.ndarray:
    """Hessian of sigma_k: entry (p, q) is sigma_{k-2}(kappa | pq), zero diagonal."""
    K = _as_array(kappa)
    n = K.shape[-1]
    if not 2 <= k <= n:
        raise DomainError(f"k={k} outside 2..{n}")
    out = np.zeros(K.shape + (n,))
    for p in range(n):
        for q in range(p + 1, n):
            v = elementary(np.delete(K, [p, q], axis=-1), k - 2)[..., k - 2]
            out[..., p, q] = v
            out[..., q, p] = v
    return out


def derivatives(K: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(sigma_k, grad, hess)`` for a batch; the Hessian is zero when k < 2."""
    K = np.asarray(K, dtype=float)
    s = elementary(K, k)[..., k]
    g = sigma_grad(K, k)
    H = sigma_hess(K, k) if k >= 2 else np.zeros(K.shape + (K.shape[-1],))
    return s, g, H


@dataclass(frozen=True)
class ConeClassification:
    max_k: int
    sigma_values: np.ndarray

    def contains(self, k: int) -> bool:
        return self.max_k >= k


def cone_order(kappa) -> np.ndarray:
    """Largest k with kappa in Gamma_k, evaluated over a batch (0: not in Gamma_1)."""
    K = _as_array(kappa)
    e = elementary(K)
    pos = e[..., 1:] > 0
    n = K.shape[-1]
    first_bad = np.argmax(~pos, axis=-1)
    return np.where(np.all(pos, axis=-1), n, first_bad)


def classify_cone(kappa) -> ConeClassification:
    K = _as_array(kappa)
    if K.ndim != 1:
        raise DomainError("classify_cone takes a single vector; use cone_order for batches")
    e = elementary(K)
    return ConeClassification(max_k=int(cone_order(K)), sigma_values=e)


def sample_cone_array(
    n: int,
    k: int,
    count: int,
    scale: float = 1.0,
    seed: int = 0,
    *,
    window: int = 100_000,
) -> np.ndarray:
    """Draw ``count`` vectors of Gamma_k, each sorted descending.

    Each candidate is ``scale * (mu + s * Z)`` with ``mu ~ U(0, 1)``,
    ``s ~ U(0.1, 2)`` and ``Z ~ N(0, I_n)``; in a quarter of the draws one
    coordinate is replaced by ``scale * (mu + s|Z_j|) * 10**U(0, 3)`` so that
    the regime of one dominant curvature is well populated. Candidates outside
    Gamma_k are rejected. The mixture of small and large ``s`` puts mass both
    deep inside the cone and close to its boundary.
    """
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    batch = max(1024, 2 * count)
    chunks: list[np.ndarray] = []
    got = drawn = accepted_in_window = drawn_in_window = 0
    while got < count:
        mu = rng.uniform(0.0, 1.0, (batch, 1))
        s = rng.uniform(0.1, 2.0, (batch, 1))
        Z = rng.standard_normal((batch, n))
        K = mu + s * Z
        spike = rng.uniform(size=batch) < 0.25
        j = rng.integers(0, n, batch)
        boost = 10.0 ** rng.uniform(0.0, 3.0, batch)
        rows = np.nonzero(spike)[0]
        K[rows, j[rows]] = (mu[rows, 0] + s[rows, 0] * np.abs(Z[rows, j[rows]])) * boost[rows]
        K = _sorted_desc(scale * K)
        ok = cone_order(K) >= k
        chunks.append(K[ok])
        got += int(ok.sum())
        drawn += batch
        accepted_in_window += int(ok.sum())
        drawn_in_window += batch
        if drawn_in_window >= window:
            if accepted_in_window < 1e-3 * drawn_in_window:
                raise SamplerStarvation(
                    f"Gamma_{k} sampler for n={n} starved", drawn=drawn, accepted=got
                )
            accepted_in_window = drawn_in_window = 0
    return np.concatenate(chunks)[:count]


def sample_cone(n: int, k: int, count: int, scale: float = 1.0, seed: int = 0) -> list[PrincipalCurvatures]:
    """Seeded rejection sample of Gamma_k; see :func:`sample_cone_array`."""
    return [PrincipalCurvatures.from_values(row) for row in sample_cone_array(n, k, count, scale, seed)]


def _require_cone(K: np.ndarray, k: int, what: str) -> None:
    if cone_order(K) < k:
        raise PreconditionError(f"{what}: kappa is not in Gamma_{k}")


class DominanceCheck(NamedTuple):
    holds: bool
    slack: float
    ratio: float


class MarginCheck(NamedTuple):
    holds: bool
    worst_margin: object


class TraceCheck(NamedTuple):
    holds: bool
    lhs: float
    rhs: float


def sigma_l_dominance_terms(K: np.ndarray, k: int, l: int):
    """Batch form: ``(lhs, rhs, ratio)`` with lhs = sigma_l, rhs = kappa_1...kappa_l
    and ratio = sigma_k / (kappa_1...kappa_k). ``K`` must be sorted descending."""
    e = elementary(K, k, presorted=True)
    lhs = e[..., l]
    rhs = np.prod(K[..., :l], axis=-1)
    ratio = e[..., k] / np.prod(K[..., :k], axis=-1)
    return lhs, rhs, ratio


def check_sigma_l_dominance(kappa, k: int, l: int) -> DominanceCheck:
    """sigma_l(kappa) > kappa_1 ... kappa_l on Gamma_k, plus the ratio used to
    estimate the constant in sigma_k <= C kappa_1 ... kappa_k."""
    K = _sorted_desc(_as_array(kappa))
    n = K.shape[-1]
    if not 1 <= l < k <= n:
        raise DomainError(f"need 1 <= l < k <= n, got l={l}, k={k}, n={n}")
    _require_cone(K, k, "sigma_l dominance")
    lhs, rhs, ratio = sigma_l_dominance_terms(K, k, l)
    slack = float(lhs - rhs)
    return DominanceCheck(bool(slack >= -tolerance(lhs, rhs)), slack, float(ratio))


def negative_kappa_margins(K: np.ndarray, k: int):
    """Batch form: per-entry margin ((n-k)/k) kappa_1 + kappa_i, NaN where kappa_i > 0."""
    n = K.shape[-1]
    bound = (n - k) / k * K[..., :1]
    margin = np.where(K <= 0, bound + K, np.nan)
    tol = tolerance(-K, bound)
    return margin, tol


def check_negative_kappa(kappa, k: int) -> MarginCheck:
    """-kappa_i < ((n-k)/k) kappa_1 for every nonpositive entry of kappa in Gamma_k."""
    K = _sorted_desc(_as_array(kappa))
    n = K.shape[-1]
    if not 1 <= k <= n:
        raise DomainError(f"k={k} outside 1..{n}")
    _require_cone(K, k, "negative-kappa bound")
    margin, tol = negative_kappa_margins(K, k)
    if np.all(np.isnan(margin)):
        return MarginCheck(True, POS_INF)
    i = int(np.nanargmin(margin))
    return MarginCheck(bool(margin[i] >= -tol[i]), float(margin[i]))


def kappa_sq_trace_terms(K: np.ndarray, k: int):
    """Batch form: ``(sum kappa_i^2 sigma_k^{ii}, (k/n) kappa_1 sigma_k)``."""
    n = K.shape[-1]
    g = sigma_grad(K, k)
    lhs = np.sum(K**2 * g, axis=-1)
    rhs = k / n * K[..., 0] * elementary(K, k, presorted=True)[..., k]
    return lhs, rhs


def check_kappa_sq_trace(kappa, k: int) -> TraceCheck:
    K = _sorted_desc(_as_array(kappa))
    n = K.shape[-1]
    if not 1 <= k <= n:
        raise DomainError(f"k={k} outside 1..{n}")
    _require_cone(K, k, "kappa^2 trace bound")
    lhs, rhs = kappa_sq_trace_terms(K, k)
    return TraceCheck(bool(lhs >= rhs - tolerance(lhs, rhs)), float(lhs), float(rhs))
