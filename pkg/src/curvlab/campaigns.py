"""Randomized verification campaigns for the sigma_k and cone lemmas.

Every campaign takes ``(n, k, budget, seed)`` plus campaign options and
returns a :class:`ConcavityReport` (one per parameter combination). Samples
are drawn from a generator seeded by ``(seed, campaign, n, k, ...)``, so a
campaign's outcome does not depend on which other campaigns run beside it.
"""

from __future__ import annotations

import time
import zlib
from typing import Callable

import numpy as np

from ._parallel import map_chunks
from .concavity import (
    ConcavityReport,
    adversarial,
    fill_report,
    find_beta,
    find_delta_prime,
    quotient_concavity_matrices,
    renwang_range_ok,
    semiconvexity_terms,
)
from .errors import ConfigError
from .symfunc import (
    REL_TOL,
    elementary,
    kappa_sq_trace_terms,
    sample_cone_array,
    sigma_grad,
    sigma_hess,
    sigma_l_dominance_terms,
)

IDENTITY_TOL = 1e-12
GRAD_FD_TOL = 1e-6
HESS_FD_TOL = 1e-5
FD_H = 1e-3


def derive_seed(seed: int, *parts) -> int:
    """Stable 64-bit seed from a base seed and labels."""
    words = [int(seed)]
    for p in parts:
        words.append(zlib.crc32(p.encode()) if isinstance(p, str) else int(p))
    return int(np.random.SeedSequence(words).generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


def _scale(*arrays):
    out = np.ones_like(np.asarray(arrays[0], dtype=float))
    for a in arrays:
        out = np.maximum(out, np.abs(a))
    return out


def _report(name, params, seed, budget) -> ConcavityReport:
    return ConcavityReport(campaign=name, params=params, seed=seed, budget=budget)


# -------------------------------------------------------------- identities


def _excluded(K: np.ndarray, kmax: int) -> np.ndarray:
    """E[b, i, j] = sigma_j(kappa | i) for j = 0..kmax."""
    n = K.shape[1]
    out = np.empty((K.shape[0], n, kmax + 1))
    for i in range(n):
        out[:, i] = elementary(np.delete(K, i, axis=1), kmax) if n > 1 else np.eye(1, kmax + 1)
    return out


def _identity_terms(K: np.ndarray, k: int):
    n = K.shape[1]
    e = elementary(K, k)
    ea = elementary(np.abs(K), k)
    E = _excluded(K, k)
    sk, sk1 = e[:, k], e[:, k - 1]
    S = np.maximum(ea[:, k], 1e-300)
    S1 = np.maximum(ea[:, k - 1], 1e-300)
    # sigma_k = kappa_i sigma_{k-1}(kappa|i) + sigma_k(kappa|i), every i
    split = np.abs(sk[:, None] - (K * E[:, :, k - 1] + E[:, :, k])).max(axis=1) / S
    euler = np.abs(np.sum(K * E[:, :, k - 1], axis=1) - k * sk) / S
    trace = np.abs(np.sum(E[:, :, k - 1], axis=1) - (n - k + 1) * sk1) / S1
    # derivatives against central differences (exact for a multi-affine map)
    g = sigma_grad(K, k)
    H = sigma_hess(K, k) if k >= 2 else np.zeros((len(K), n, n))
    gs = np.maximum(ea[:, k - 1], 1.0)
    hs = np.maximum(ea[:, k - 2], 1.0) if k >= 2 else np.ones(len(K))
    gerr = np.zeros(len(K))
    herr = np.zeros(len(K))
    eye = np.eye(n) * FD_H
    f = lambda X: elementary(X, k)[:, k]
    for i in range(n):
        fd = (f(K + eye[i]) - f(K - eye[i])) / (2 * FD_H)
        gerr = np.maximum(gerr, np.abs(fd - g[:, i]) / gs)
        for j in range(i + 1, n):
            fd2 = (f(K + eye[i] + eye[j]) - f(K + eye[i] - eye[j]) - f(K - eye[i] + eye[j]) + f(K - eye[i] - eye[j])) / (4 * FD_H**2)
            herr = np.maximum(herr, np.abs(fd2 - H[:, i, j]) / hs)
    return split, euler, trace, gerr, herr


def identities_campaign(n: int, k: int, budget: int, seed: int, threads=None, **_) -> ConcavityReport:
    """Splitting, Euler and trace identities of sigma_k, plus gradient and
    Hessian against central differences, on unconstrained random kappa."""
    rep = _report("identities", {"n": n, "k": k}, seed, budget)
    rng = np.random.default_rng(derive_seed(seed, "identities", n, k))
    K = rng.standard_normal((budget, n)) * 10.0 ** rng.uniform(-1, 1, (budget, 1))
    split, euler, trace, gerr, herr = map_chunks(lambda Kc: _identity_terms(Kc, k), [K], threads)
    worst = np.maximum.reduce([split / IDENTITY_TOL, euler / IDENTITY_TOL, trace / IDENTITY_TOL, gerr / GRAD_FD_TOL, herr / HESS_FD_TOL])
    # lhs: worst error as a fraction of its tolerance; fails when above 1
    fill_report(rep, K, None, worst, np.ones_like(worst), 1.0 - worst)
    rep.params.update(
        max_split_error=float(split.max(initial=0)),
        max_euler_error=float(euler.max(initial=0)),
        max_trace_error=float(trace.max(initial=0)),
        max_grad_fd_error=float(gerr.max(initial=0)),
        max_hess_fd_error=float(herr.max(initial=0)),
    )
    rep.note = "records list error/tolerance ratios (lhs) against 1 (rhs)"
    return rep


# ---------------------------------------------------------- cone lemmas


def _cone(n, k, budget, seed, name, extra=()):
    return sample_cone_array(n, k, budget, seed=derive_seed(seed, name, n, k, *extra))


def negative_kappa_campaign(n: int, k: int, budget: int, seed: int, threads=None, **_) -> ConcavityReport:
    """-kappa_n < ((n-k)/k) kappa_1 on Gamma_k (vacuous when kappa_n > 0)."""
    rep = _report("negative-kappa", {"n": n, "k": k}, seed, budget)
    K = _cone(n, k, budget, seed, "negative-kappa")
    lhs = -K[:, -1]
    rhs = (n - k) / k * K[:, 0]
    fill_report(rep, K, None, lhs, rhs, (rhs - lhs) / _scale(lhs, rhs))
    return rep


def kappa_sq_trace_campaign(n: int, k: int, budget: int, seed: int, threads=None, **_) -> ConcavityReport:
    """sum kappa_i^2 sigma_k^{ii} >= (k/n) kappa_1 sigma_k on Gamma_k."""
    rep = _report("kappa-sq-trace", {"n": n, "k": k}, seed, budget)
    K = _cone(n, k, budget, seed, "kappa-sq-trace")
    lhs, rhs = map_chunks(lambda Kc: kappa_sq_trace_terms(Kc, k), [K], threads)
    fill_report(rep, K, None, lhs, rhs, (lhs - rhs) / _scale(lhs, rhs))
    return rep


def sigma_l_dominance_campaign(n: int, k: int, budget: int, seed: int, threads=None, **_) -> ConcavityReport:
    """sigma_l > kappa_1 ... kappa_l for every 1 <= l < k on Gamma_k; the
    largest observed sigma_k / (kappa_1 ... kappa_k) is the found constant."""
    rep = _report("sigma-l-dominance", {"n": n, "k": k}, seed, budget)
    if k < 2:
        rep.note = "no l with 1 <= l < k"
        return rep
    K = _cone(n, k, budget, seed, "sigma-l-dominance")
    worst_gap = np.full(len(K), np.inf)
    wl, wr = np.zeros(len(K)), np.zeros(len(K))
    ratio = None
    for l in range(1, k):
        lhs, rhs, ratio = sigma_l_dominance_terms(K, k, l)
        gap = (lhs - rhs) / _scale(lhs, rhs)
        sel = gap < worst_gap
        worst_gap = np.where(sel, gap, worst_gap)
        wl, wr = np.where(sel, lhs, wl), np.where(sel, rhs, wr)
    fill_report(rep, K, None, wl, wr, worst_gap)
    rep.found_constant = float(ratio.max())
    rep.note = "found_constant: max sigma_k / (kappa_1...kappa_k) over the sample"
    return rep


def quotient_concavity_campaign(n: int, k: int, budget: int, seed: int, threads=None, **_) -> ConcavityReport:
    """Concavity of sigma_k^(1/k) in quadratic-form shape, adversarial xi."""
    rep = _report("quotient-concavity", {"n": n, "k": k}, seed, budget)
    K = _cone(n, k, budget, seed, "quotient-concavity")
    res = map_chunks(lambda Kc: adversarial(*quotient_concavity_matrices(Kc, k)), [K], threads)
    fill_report(rep, K, *res)
    return rep


def semiconvexity_campaign(n: int, k: int, budget: int, seed: int, threads=None, **_) -> ConcavityReport:
    """Gamma_{k+1} with sigma_k <= psi_sup forces kappa_k <= eta/n and
    kappa_n >= -eta, eta = n psi_sup^(1/k). psi_sup is set to sigma_k, the
    tightest admissible value."""
    rep = _report("semiconvexity", {"n": n, "k": k}, seed, budget)
    if k >= n:
        rep.note = "needs Gamma_(k+1): only k < n applies"
        return rep
    K = _cone(n, k + 1, budget, seed, "semiconvexity")
    psi = elementary(K, k, presorted=True)[:, k]
    eta, up, low = semiconvexity_terms(K, k, psi)
    g_up = up / _scale(K[:, k - 1], eta / n)
    g_low = low / _scale(K[:, -1], eta)
    use_up = g_up < g_low
    lhs = np.where(use_up, eta / n, K[:, -1])
    rhs = np.where(use_up, K[:, k - 1], -eta)
    fill_report(rep, K, None, lhs, rhs, np.minimum(g_up, g_low))
    return rep


def renwang_campaign(n: int, k: int, budget: int, seed: int, threads=None, *, thresholds=(10.0, 100.0, 1000.0), N0=1.0, N1=10.0, **_):
    """find_beta at each kappa_1 threshold."""
    if not renwang_range_ok(n, k):
        raise ConfigError(f"renwang needs k = n-1 (n >= 3) or k = n-2 (n >= 5), got n={n}, k={k}")
    return [
        find_beta(n, k, N0, N1, float(t), budget, seed=derive_seed(seed, "renwang", n, k, int(t)), threads=threads)
        for t in thresholds
    ]


def lu_campaign(n: int, k: int, budget: int, seed: int, threads=None, *, eps=0.1, delta=1 / 3, delta0=0.5, l=None, **_):
    """find_delta_prime for each l (default: every 1 <= l < k)."""
    ls = range(1, k) if l is None else ([l] if isinstance(l, int) else l)
    return [
        find_delta_prime(n, k, int(li), eps, delta, delta0, budget, seed=derive_seed(seed, "lu", n, k, int(li)) % 2**62, threads=threads)
        for li in ls
    ]


CAMPAIGNS: dict[str, Callable] = {
    "identities": identities_campaign,
    "negative-kappa": negative_kappa_campaign,
    "kappa-sq-trace": kappa_sq_trace_campaign,
    "sigma-l-dominance": sigma_l_dominance_campaign,
    "quotient-concavity": quotient_concavity_campaign,
    "semiconvexity": semiconvexity_campaign,
    "renwang": renwang_campaign,
    "lu": lu_campaign,
}


def _int_list(value, n=None, what="n"):
    if isinstance(value, bool):
        raise ConfigError(f"bad {what}: {value!r}")
    if isinstance(value, int):
        return [value]
    if isinstance(value, str) and n is not None:
        v = value.replace(" ", "")
        if v == "all":
            return list(range(1, n + 1))
        if v.startswith("n-") and v[2:].isdigit():
            return [n - int(v[2:])]
        if v == "n":
            return [n]
    if isinstance(value, dict) and {"min", "max"} <= value.keys():
        return list(range(int(value["min"]), int(value["max"]) + 1))
    if isinstance(value, list) and all(isinstance(x, int) and not isinstance(x, bool) for x in value):
        return list(value)
    raise ConfigError(f"bad {what}: {value!r}")


def expand_pairs(entry: dict) -> list[tuple[int, int]]:
    """(n, k) pairs from a campaign entry: explicit "pairs", or "n" and "k"
    given as an int, a list, {"min", "max"}, or (for k) "all", "n", "n-1", ..."""
    if "pairs" in entry:
        try:
            return [(int(n), int(k)) for n, k in entry["pairs"]]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad pairs: {entry['pairs']!r}") from exc
    if "n" not in entry:
        raise ConfigError("campaign entry needs 'n' or 'pairs'")
    out = []
    for n in _int_list(entry["n"]):
        kmin = int(entry.get("k_min", 1))
        for k in _int_list(entry.get("k", "all"), n, "k"):
            if kmin <= k <= n:
                out.append((n, k))
    return out


def run_campaign(entry: dict, seed: int, threads=None) -> list[ConcavityReport]:
    """Run one config entry: {"campaign": name, "n": .., "k": .., "budget": ..}."""
    if not isinstance(entry, dict):
        raise ConfigError(f"campaign entry must be an object, got {entry!r}")
    name = entry.get("campaign") or entry.get("name")
    if isinstance(name, str):
        name = name.replace("_", "-")
    if name not in CAMPAIGNS:
        raise ConfigError(f"unknown campaign {name!r}; choose from {', '.join(CAMPAIGNS)}")
    budget = entry.get("budget", 10_000)
    if isinstance(budget, bool) or not isinstance(budget, (int, float)) or budget < 0:
        raise ConfigError(f"bad budget {budget!r}")
    budget = int(budget)
    opts = {key: entry[key] for key in ("thresholds", "N0", "N1", "eps", "delta", "delta0", "l") if key in entry}
    fn = CAMPAIGNS[name]
    out = []
    for n, k in expand_pairs(entry):
        if not 1 <= k <= n:
            raise ConfigError(f"need 1 <= k <= n, got n={n}, k={k}")
        t0 = time.perf_counter()
        res = fn(n, k, budget, int(seed), threads, **opts) if budget > 0 else _report(name, {"n": n, "k": k}, int(seed), 0)
        for rep in res if isinstance(res, list) else [res]:
            if not rep.wall_time:
                rep.wall_time = time.perf_counter() - t0
            out.append(rep)
    return out
