"""Verification harness for the concavity inequalities of sigma_k.

Each inequality is a pair of quadratic forms in the test vector xi,
``xi^T L xi >= xi^T R xi``. Single queries evaluate both sides for a given
xi. Campaigns instead pick, for every sampled kappa, the unit xi that
minimises ``xi^T (L - R) xi`` (the eigenvector of the smallest eigenvalue),
so a campaign without violations certifies the inequality for *all* xi at
each sampled kappa. A found constant is a certificate over the sampled set
only; nothing is claimed about unsampled curvature vectors.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ._parallel import map_chunks
from .errors import DegenerateDenominatorError, DomainError, PreconditionError, SamplerStarvation
from .symfunc import (
    REL_TOL,
    PrincipalCurvatures,
    cone_order,
    derivatives,
    elementary,
    sigma_grad,
    sigma_hess,
    tolerance,
)

DEGENERATE_GAP = 1e-8
BETA_EXPONENTS = (-20, 20)
DELTA_PRIME_EXPONENTS = range(1, 31)
RECORD_CAP = 20


class NotInConeError(PreconditionError):
    pass


class SigmaBoundError(PreconditionError):
    pass


@dataclass
class ConcavityReport:
    """Outcome of a sampling campaign.

    ``violations`` holds up to RECORD_CAP worst offenders (most negative
    relative gap first); ``violation_count`` is the full count. ``tightest``
    lists the samples closest to equality, which serve as the certificate
    for a found constant. ``wall_time`` is excluded from :meth:`to_dict`.
    """

    campaign: str
    params: dict
    seed: int
    budget: int
    samples_tested: int = 0
    violation_count: int = 0
    violations: list[dict] = field(default_factory=list)
    tightest: list[dict] = field(default_factory=list)
    found_constant: float | None = None
    note: str = ""
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return self.violation_count == 0

    def to_dict(self) -> dict:
        return {
            "campaign": self.campaign,
            "params": self.params,
            "seed": self.seed,
            "budget": self.budget,
            "samples_tested": self.samples_tested,
            "passed": self.passed,
            "violation_count": self.violation_count,
            "violations": self.violations,
            "tightest": self.tightest,
            "found_constant": self.found_constant,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConcavityReport":
        keys = ("campaign", "params", "seed", "budget", "samples_tested", "violation_count",
                "violations", "tightest", "found_constant", "note")
        return cls(**{k: d[k] for k in keys if k in d})

    def merge(self, other: "ConcavityReport") -> "ConcavityReport":
        """Combine two reports over disjoint sample sets of the same campaign."""
        rank = lambda r: r["rel_gap"]
        return ConcavityReport(
            campaign=self.campaign,
            params=self.params,
            seed=self.seed,
            budget=self.budget + other.budget,
            samples_tested=self.samples_tested + other.samples_tested,
            violation_count=self.violation_count + other.violation_count,
            violations=sorted(self.violations + other.violations, key=rank)[:RECORD_CAP],
            tightest=sorted(self.tightest + other.tightest, key=rank)[:RECORD_CAP],
            found_constant=self.found_constant,
            note=self.note,
            wall_time=self.wall_time + other.wall_time,
        )


def sample_records(K, Xi, lhs, rhs, rel_gap, idx) -> list[dict]:
    out = []
    for i in idx:
        out.append(
            {
                "kappa": [float(x) for x in K[i]],
                "xi": None if Xi is None else [float(x) for x in Xi[i]],
                "lhs": float(lhs[i]),
                "rhs": float(rhs[i]),
                "gap": float(lhs[i] - rhs[i]),
                "rel_gap": float(rel_gap[i]),
            }
        )
    return out


def fill_report(report: ConcavityReport, K, Xi, lhs, rhs, rel_gap) -> ConcavityReport:
    """Record counts, worst violations and tightest samples from evaluated arrays."""
    bad = rel_gap < -REL_TOL
    order = np.argsort(rel_gap, kind="stable")
    report.samples_tested = int(len(K))
    report.violation_count = int(bad.sum())
    report.violations = sample_records(K, Xi, lhs, rhs, rel_gap, [i for i in order if bad[i]][:RECORD_CAP])
    report.tightest = sample_records(K, Xi, lhs, rhs, rel_gap, [i for i in order if not bad[i]][:10])
    return report


def adversarial(L: np.ndarray, R: np.ndarray):
    """Unit xi minimising xi^T (L - R) xi per batch entry.

    Returns ``(xi, lhs, rhs, rel_gap)`` where rel_gap is the minimum of the
    form divided by the larger entrywise max-norm of L and R.
    """
    scale = np.maximum(np.abs(L).max(axis=(-2, -1)), np.abs(R).max(axis=(-2, -1)))
    scale = np.where(scale > 0, scale, 1.0)
    w, V = np.linalg.eigh((L - R) / scale[:, None, None])
    xi = V[:, :, 0]
    lhs = np.einsum("bi,bij,bj->b", xi, L, xi)
    rhs = np.einsum("bi,bij,bj->b", xi, R, xi)
    return xi, lhs, rhs, w[:, 0]


def _outer(g):
    return g[..., :, None] * g[..., None, :]


def _diag(d):
    n = d.shape[-1]
    out = np.zeros(d.shape + (n,))
    idx = np.arange(n)
    out[..., idx, idx] = d
    return out


# ---------------------------------------------------------------- Ren-Wang


def renwang_range_ok(n: int, k: int) -> bool:
    return (k == n - 1 and n >= 3) or (k == n - 2 and n >= 5)


@dataclass
class RenWangQuery:
    n: int
    k: int
    kappa: PrincipalCurvatures
    xi: np.ndarray
    beta: float
    sigma_bounds: tuple[float, float]

    def __post_init__(self):
        if not isinstance(self.kappa, PrincipalCurvatures):
            self.kappa = PrincipalCurvatures.from_values(self.kappa)
        # xi is given in the caller's ordering of kappa
        self.xi = np.asarray(self.xi, dtype=float)
        K = self.kappa.values
        if self.kappa.n != self.n or self.xi.shape != (self.n,):
            raise DomainError("kappa and xi must both have length n")
        if not renwang_range_ok(self.n, self.k):
            raise PreconditionError(f"(n, k) = ({self.n}, {self.k}) outside k=n-1 (n>=3) or k=n-2 (n>=5)")
        if self.beta <= 0:
            raise DomainError("beta must be positive")
        if cone_order(K) < self.k:
            raise NotInConeError(f"kappa not in Gamma_{self.k}")
        N0, N1 = self.sigma_bounds
        s = elementary(K, self.k, presorted=True)[self.k]
        if not N0 <= s <= N1:
            raise SigmaBoundError(f"sigma_k = {s:g} outside [{N0:g}, {N1:g}]")
        if K[0] - K[1] < DEGENERATE_GAP * abs(K[0]):
            raise DegenerateDenominatorError("kappa_1 must exceed kappa_2 by a relative margin of 1e-8")

    @property
    def xi_sorted(self) -> np.ndarray:
        return self.xi[self.kappa.order]


def renwang_matrices(K: np.ndarray, k: int, beta: float):
    """``(L, R)`` with form = xi^T (L - R) xi; K sorted descending, kappa_1 simple."""
    _, g, H = derivatives(K, k)
    k1 = K[:, 0]
    weight = np.zeros_like(K)
    weight[:, 1:] = 2 * k1[:, None] / (k1[:, None] - K[:, 1:]) * g[:, 1:]
    L = beta * k1[:, None, None] * _outer(g) + _diag(weight)
    first = np.zeros_like(K)
    first[:, 0] = g[:, 0]
    R = k1[:, None, None] * H + _diag(first)
    return L, R


def renwang_form(q: RenWangQuery) -> float:
    """Left-hand side of the Ren-Wang inequality; predicted >= 0 for large kappa_1."""
    K = q.kappa.values
    xi = q.xi_sorted
    k1 = K[0]
    g = sigma_grad(K, q.k)
    quad = float(xi @ sigma_hess(K, q.k) @ xi) if q.k >= 2 else 0.0
    tail = np.sum(2 * k1 / (k1 - K[1:]) * g[1:] * xi[1:] ** 2)
    return float(k1 * (q.beta * (g @ xi) ** 2 - quad) - g[0] * xi[0] ** 2 + tail)


def sample_renwang(
    n: int, k: int, N0: float, N1: float, threshold: float, count: int, seed: int
) -> np.ndarray:
    """Gamma_k vectors with N0 <= sigma_k <= N1 and kappa_1 >= threshold.

    kappa_1 = threshold * 10**U(0,1); the middle entries are kappa_1 * U**gamma
    with gamma ~ U(1,4) and a negative sign with probability 0.3; the last
    entry is solved from the affine dependence of sigma_k on it so that
    sigma_k hits a uniform target in [N0, N1]. Candidates outside Gamma_k,
    with kappa_1 not the top entry, or with a degenerate gap are rejected.
    """
    if not renwang_range_ok(n, k):
        raise PreconditionError(f"(n, k) = ({n}, {k}) outside the Ren-Wang range")
    rng = np.random.default_rng(seed)
    chunks, got, drawn = [], 0, 0
    batch = max(2048, 2 * count)
    while got < count:
        k1 = threshold * 10.0 ** rng.uniform(0.0, 1.0, batch)
        gam = rng.uniform(1.0, 4.0, (batch, 1))
        mid = k1[:, None] * rng.uniform(0.0, 1.0, (batch, n - 2)) ** gam
        mid *= np.where(rng.uniform(size=(batch, n - 2)) < 0.3, -1.0, 1.0)
        target = rng.uniform(N0, N1, batch)
        head = np.concatenate([k1[:, None], mid], axis=1)
        e = elementary(head, k)
        with np.errstate(divide="ignore", invalid="ignore"):
            last = (target - e[:, k]) / e[:, k - 1]
        K = -np.sort(-np.concatenate([head, last[:, None]], axis=1), axis=1)
        ok = np.all(np.isfinite(K), axis=1)
        K = np.where(ok[:, None], K, 0.0)
        s = elementary(K, k, presorted=True)[:, k]
        ok &= cone_order(K) >= k
        ok &= (s >= N0) & (s <= N1)
        ok &= K[:, 0] >= threshold
        ok &= K[:, 0] - K[:, 1] >= DEGENERATE_GAP * K[:, 0]
        chunks.append(K[ok])
        got += int(ok.sum())
        drawn += batch
        if drawn >= 100 * batch and got < 1e-3 * drawn:
            raise SamplerStarvation("Ren-Wang sampler starved", drawn=drawn, accepted=got)
    return np.concatenate(chunks)[:count]


def _renwang_eval(K, k, beta, threads):
    def chunk(Kc):
        return adversarial(*renwang_matrices(Kc, k, beta))

    return map_chunks(chunk, [K], threads)


def find_beta(
    n: int,
    k: int,
    N0: float,
    N1: float,
    kappa1_threshold: float,
    budget: int,
    seed: int = 0,
    threads: int | None = None,
) -> ConcavityReport:
    """Smallest dyadic beta in [2^-20, 2^20] with no violation on the sample.

    The form is nondecreasing in beta (beta multiplies a PSD term), so
    bisection over the integer exponent is exact on the sampled set.
    """
    t0 = time.perf_counter()
    report = ConcavityReport(
        campaign="renwang",
        params={"n": n, "k": k, "N0": N0, "N1": N1, "kappa1_threshold": kappa1_threshold},
        seed=seed,
        budget=budget,
    )
    if budget <= 0:
        report.note = "empty budget: nothing tested"
        return report
    K = sample_renwang(n, k, N0, N1, kappa1_threshold, budget, seed)
    lo, hi = BETA_EXPONENTS
    cache = {}

    def evaluate(e):
        if e not in cache:
            cache[e] = _renwang_eval(K, k, 2.0**e, threads)
        return cache[e]

    xi, lhs, rhs, gap = evaluate(hi)
    if np.any(gap < -REL_TOL):
        fill_report(report, K, xi, lhs, rhs, gap)
        report.note = f"no beta <= 2^{hi} passes; worst counterexample recorded"
        report.wall_time = time.perf_counter() - t0
        return report
    if np.all(evaluate(lo)[3] >= -REL_TOL):
        hi = lo
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if np.all(evaluate(mid)[3] >= -REL_TOL):
                hi = mid
            else:
                lo = mid
    fill_report(report, K, *evaluate(hi))
    report.found_constant = 2.0**hi
    report.params["beta_exponent"] = hi
    report.note = "beta certifies the sampled set only (adversarial xi per sample)"
    report.wall_time = time.perf_counter() - t0
    return report


# --------------------------------------------------------------------- Lu


@dataclass
class LuQuery:
    n: int
    k: int
    l: int
    kappa: PrincipalCurvatures
    xi: np.ndarray
    eps: float
    delta: float
    delta0: float
    delta_prime: float

    def __post_init__(self):
        if not isinstance(self.kappa, PrincipalCurvatures):
            self.kappa = PrincipalCurvatures.from_values(self.kappa)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.kappa.n != self.n or self.xi.shape != (self.n,):
            raise DomainError("kappa and xi must both have length n")
        if not 1 <= self.l < self.k <= self.n:
            raise DomainError(f"need 1 <= l < k <= n, got l={self.l}, k={self.k}, n={self.n}")
        for name in ("eps", "delta", "delta0", "delta_prime"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise DomainError(f"{name}={v} outside (0, 1)")
        K = self.kappa.values
        if elementary(K, self.k, presorted=True)[self.k] <= 0 or cone_order(K) < self.k:
            raise NotInConeError(f"kappa not in Gamma_{self.k}")
        if K[self.l - 1] < self.delta * K[0] or K[self.l] > self.delta_prime * K[0]:
            raise PreconditionError("kappa violates kappa_l >= delta kappa_1 or kappa_{l+1} <= delta' kappa_1")

    @property
    def xi_sorted(self) -> np.ndarray:
        return self.xi[self.kappa.order]


def lu_matrices(K: np.ndarray, k: int, l: int, eps: float, delta0: float):
    """``(L, R)`` of Lu's inequality, both multiplied by kappa_1^2 (scale-free)."""
    s, g, H = derivatives(K, k)
    k1 = K[:, 0]
    L = -H / s[:, None, None] + _outer(g) / (s**2)[:, None, None]
    rd = np.zeros_like(K)
    rd[:, 0] = (1 - eps) / k1**2
    rd[:, l:] -= delta0 * g[:, l:] / (k1 * s)[:, None]
    R = _diag(rd)
    w = (k1**2)[:, None, None]
    return L * w, R * w


class LuCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def lu_form(q: LuQuery) -> LuCheck:
    """Both sides of Lu's inequality for the query's xi.

    The verdict is taken on xi / |xi| with both sides multiplied by
    kappa_1^2, so it is invariant under rescaling xi or kappa.
    """
    K = q.kappa.values
    xi = q.xi_sorted
    s = elementary(K, q.k, presorted=True)[q.k]
    g = sigma_grad(K, q.k)
    H = sigma_hess(K, q.k) if q.k >= 2 else np.zeros((q.n, q.n))
    k1 = K[0]
    lhs = -float(xi @ H @ xi) / s + float(g @ xi) ** 2 / s**2
    rhs = (1 - q.eps) * xi[0] ** 2 / k1**2 - q.delta0 * float(np.sum(g[q.l :] * xi[q.l :] ** 2)) / (k1 * s)
    norm2 = float(xi @ xi)
    if norm2 == 0:
        return LuCheck(lhs, rhs, True)
    a, b = lhs * k1**2 / norm2, rhs * k1**2 / norm2
    return LuCheck(float(lhs), float(rhs), bool(a >= b - tolerance(a, b)))


def sample_lu(
    n: int, k: int, l: int, delta: float, delta_prime: float, count: int, seed: int
) -> np.ndarray:
    """Vectors of Gamma_k with kappa_l >= delta kappa_1 and kappa_{l+1} <= delta' kappa_1.

    kappa_1 = 10**U(0,2); kappa_2..kappa_l ~ U[delta, 1] kappa_1; the rest
    ~ U[-c, delta'] kappa_1 with c = (n-k)/k, the largest negative ratio the
    cone allows. The negative parts are then multiplied by t * t_max where
    t ~ U(0,1) and t_max is the bisected exit time from Gamma_k, which keeps
    acceptance high while still reaching the cone boundary.
    """
    if not 1 <= l < k <= n:
        raise DomainError(f"need 1 <= l < k <= n, got l={l}, k={k}, n={n}")
    rng = np.random.default_rng(seed)
    c = (n - k) / k
    batch = max(2048, 2 * count)
    chunks, got, drawn = [], 0, 0
    while got < count:
        k1 = 10.0 ** rng.uniform(0.0, 2.0, batch)
        K = np.empty((batch, n))
        K[:, 0] = 1.0
        K[:, 1:l] = rng.uniform(delta, 1.0, (batch, l - 1))
        K[:, l:] = rng.uniform(-c, delta_prime, (batch, n - l))
        pos, neg = np.maximum(K, 0.0), np.minimum(K, 0.0)
        base_ok = cone_order(pos) >= k
        t_in, t_out = np.zeros(batch), np.ones(batch)
        inside = cone_order(pos + neg) >= k
        t_in[inside] = 1.0
        todo = np.flatnonzero(base_ok & ~inside)
        lo_t, hi_t = t_in[todo], t_out[todo]
        P, Ng = pos[todo], neg[todo]
        for _ in range(50):
            mid = 0.5 * (lo_t + hi_t)
            # membership does not depend on order, so skip the sort
            e = elementary(P + mid[:, None] * Ng, k, presorted=True)
            m_ok = np.all(e[:, 1:] > 0, axis=1)
            lo_t = np.where(m_ok, mid, lo_t)
            hi_t = np.where(m_ok, hi_t, mid)
        t_in[todo] = lo_t
        t = t_in * rng.uniform(0.0, 1.0, batch)
        K = -np.sort(-(pos + t[:, None] * neg), axis=1) * k1[:, None]
        ok = base_ok & (cone_order(K) >= k)
        ok &= K[:, l - 1] >= delta * K[:, 0]
        ok &= K[:, l] <= delta_prime * K[:, 0]
        chunks.append(K[ok])
        got += int(ok.sum())
        drawn += batch
        if drawn >= 100 * batch and got < 1e-3 * drawn:
            raise SamplerStarvation("Lu sampler starved", drawn=drawn, accepted=got)
    return np.concatenate(chunks)[:count]


def find_delta_prime(
    n: int,
    k: int,
    l: int,
    eps: float,
    delta: float,
    delta0: float,
    budget: int,
    seed: int = 0,
    threads: int | None = None,
) -> ConcavityReport:
    """Largest delta' in {2^-1, ..., 2^-30} whose constrained campaign is clean."""
    t0 = time.perf_counter()
    report = ConcavityReport(
        campaign="lu",
        params={"n": n, "k": k, "l": l, "eps": eps, "delta": delta, "delta0": delta0},
        seed=seed,
        budget=budget,
    )
    if budget <= 0:
        report.note = "empty budget: nothing tested"
        return report
    sweep = []
    last = None
    for j in DELTA_PRIME_EXPONENTS:
        dp = 2.0**-j
        K = sample_lu(n, k, l, delta, dp, budget, seed + j)
        res = map_chunks(lambda Kc: adversarial(*lu_matrices(Kc, k, l, eps, delta0)), [K], threads)
        bad = int(np.sum(res[3] < -REL_TOL))
        sweep.append({"delta_prime": dp, "violations": bad})
        last = (K, res)
        if bad == 0:
            fill_report(report, K, *res)
            report.found_constant = dp
            report.note = "delta' certifies the sampled set only (adversarial xi per sample)"
            break
    else:
        K, res = last
        fill_report(report, K, *res)
        report.note = "no delta' >= 2^-30 passes; worst counterexample recorded"
    report.params["sweep"] = sweep
    report.wall_time = time.perf_counter() - t0
    return report


# ------------------------------------------------------ sigma_k concavity


class QuotientCheck(NamedTuple):
    value: float
    quotient: float | None
    discrepancy: float | None


def quotient_second_derivative(kappa, k: int, i: int, j: int) -> QuotientCheck:
    """sigma_{k-2}(kappa | ij) directly, cross-checked against the difference
    quotient (sigma_k^{jj} - sigma_k^{ii}) / (kappa_i - kappa_j) when defined."""
    K = np.asarray(kappa.values if isinstance(kappa, PrincipalCurvatures) else kappa, dtype=float)
    n = K.size
    if not 2 <= k <= n:
        raise DomainError(f"k={k} outside 2..{n}")
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise DomainError(f"need distinct indices in 0..{n - 1}, got {i}, {j}")
    if cone_order(K) < k:
        raise NotInConeError(f"kappa not in Gamma_{k}")
    value = float(sigma_hess(K, k)[i, j])
    if abs(K[i] - K[j]) <= 1e-8 * max(1.0, float(np.abs(K).max())):
        return QuotientCheck(value, None, None)
    g = sigma_grad(K, k)
    quotient = float((g[j] - g[i]) / (K[i] - K[j]))
    return QuotientCheck(value, quotient, abs(quotient - value))


def quotient_concavity_matrices(K: np.ndarray, k: int):
    s, g, H = derivatives(K, k)
    return -H, -(k - 1) / k * _outer(g) / s[:, None, None]


class GapCheck(NamedTuple):
    holds: bool
    gap: float


def check_quotient_concavity(kappa, xi, k: int) -> GapCheck:
    """-sum_{p!=q} sigma_k^{pp,qq} xi_p xi_q >= -((k-1)/k) (sum sigma_k^{ii} xi_i)^2 / sigma_k."""
    if isinstance(kappa, PrincipalCurvatures):
        K = kappa.values
        xi = np.asarray(xi, dtype=float)[kappa.order]
    else:
        K = np.asarray(kappa, dtype=float)
        xi = np.asarray(xi, dtype=float)
    s = elementary(K, k)[k]
    if s <= 0 or cone_order(K) < k:
        raise NotInConeError(f"kappa not in Gamma_{k}")
    g = sigma_grad(K, k)
    lhs = -float(xi @ sigma_hess(K, k) @ xi) if k >= 2 else 0.0
    rhs = -(k - 1) / k * float(g @ xi) ** 2 / s
    gap = lhs - rhs
    return GapCheck(bool(gap >= -tolerance(lhs, rhs)), float(gap))


# ------------------------------------------------------ semi-convexity


class SemiConvexCheck(NamedTuple):
    eta: float
    holds: bool


def semiconvexity_terms(K: np.ndarray, k: int, psi_sup):
    """Batch form: ``(eta, upper_margin, lower_margin)`` where the margins are
    eta/n - kappa_k and kappa_n + eta (both predicted >= 0)."""
    n = K.shape[-1]
    eta = n * np.asarray(psi_sup, dtype=float) ** (1.0 / k)
    return eta, eta / n - K[..., k - 1], K[..., -1] + eta


def check_semiconvexity_implication(kappa, k: int, psi_sup: float) -> SemiConvexCheck:
    """(k+1)-convexity with sigma_k <= psi_sup forces kappa_i >= -eta, eta = n psi_sup^(1/k)."""
    K = np.sort(np.asarray(kappa.values if isinstance(kappa, PrincipalCurvatures) else kappa, dtype=float))[::-1]
    n = K.size
    if not 1 <= k < n:
        raise DomainError(f"need 1 <= k < n for Gamma_(k+1), got k={k}, n={n}")
    if cone_order(K) < k + 1:
        raise NotInConeError(f"kappa not in Gamma_{k + 1}")
    s = elementary(K, k, presorted=True)[k]
    if s > psi_sup * (1 + REL_TOL):
        raise SigmaBoundError(f"sigma_k = {s:g} exceeds psi_sup = {psi_sup:g}")
    eta, up, low = semiconvexity_terms(K, k, psi_sup)
    ok = up >= -tolerance(K[k - 1], eta / n) and low >= -tolerance(K[-1], eta)
    return SemiConvexCheck(float(eta), bool(ok))
