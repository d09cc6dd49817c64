"""A priori estimate quantities monitored on graphs and solver output.

C0: the round-sphere barrier at the extremal radii. At a maximum of r the
graph is touched from outside by the sphere r = max r, so
sigma_k(kappa) >= C(n,k) (phi'/phi)^k there; the inequality reverses at a
minimum. C1: the support function u and eps0 = min u^2 / phi^2. C2: the
largest principal curvature and the test function
Q = log kappa_1 - N log(u - a) + alpha Phi.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import AdmissibilityError, DomainError
from .geometry import RadialGraph, SurfaceFields, surface_fields
from .solver import ContinuationRun, Problem, SolveReport
from .symfunc import cone_order, elementary

FORMAT_VERSION = 1
BARRIER_TOL_FACTOR = 10.0
BARRIER_TOL_FLOOR = 1e-12
KAPPA_GROWTH_FLAG = 10.0
MIN_U_FLAG = 1e-3


@dataclass
class C0Record:
    min_r: float
    max_r: float
    argmax: int
    argmin: int
    barrier_lhs_at_max: float
    barrier_rhs_at_max: float
    barrier_lhs_at_min: float
    barrier_rhs_at_min: float
    mesh_size: float
    tol: float
    pass_max: bool
    pass_min: bool

    @property
    def passed(self) -> bool:
        return self.pass_max and self.pass_min

    @property
    def slack_max(self) -> float:
        return self.barrier_lhs_at_max - self.barrier_rhs_at_max

    @property
    def slack_min(self) -> float:
        return self.barrier_rhs_at_min - self.barrier_lhs_at_min


def _admissible_fields(graph: RadialGraph, k: int) -> SurfaceFields:
    f = surface_fields(graph)
    order = cone_order(f.kappa)
    bad = np.flatnonzero(order < k)
    if bad.size:
        raise AdmissibilityError(f"node {int(bad[0])} is not Gamma_{k}-admissible", node=int(bad[0]))
    return f


def barrier_check(problem: Problem, graph: RadialGraph) -> C0Record:
    """Compare sigma_k(kappa) with C(n,k)(phi'/phi)^k at the grid argmax and
    argmin of r (lowest index on ties).

    The discrete extremum sits within one cell of the continuous one, so the
    pass test allows ``10 h^2`` relative slack (plus a 1e-12 floor).
    """
    n, k = problem.n, problem.k
    f = _admissible_fields(graph, k)
    sk = elementary(f.kappa, k, presorted=True)[:, k]
    imax, imin = int(np.argmax(graph.r)), int(np.argmin(graph.r))
    c = math.comb(n, k)
    rhs = lambda i: c * (f.dphi[i] / f.phi[i]) ** k
    lmax, rmax, lmin, rmin = float(sk[imax]), float(rhs(imax)), float(sk[imin]), float(rhs(imin))
    h = graph.mesh_size
    rel = BARRIER_TOL_FACTOR * h * h + BARRIER_TOL_FLOOR
    tol = rel * max(1.0, abs(rmax), abs(rmin))
    return C0Record(
        min_r=float(graph.r[imin]),
        max_r=float(graph.r[imax]),
        argmax=imax,
        argmin=imin,
        barrier_lhs_at_max=lmax,
        barrier_rhs_at_max=rmax,
        barrier_lhs_at_min=lmin,
        barrier_rhs_at_min=rmin,
        mesh_size=h,
        tol=tol,
        pass_max=bool(lmax >= rmax - tol),
        pass_min=bool(lmin <= rmin + tol),
    )


class C1Record(NamedTuple):
    min_u: float
    epsilon0: float
    argmin: int


def c1_monitor(graph: RadialGraph, fields: SurfaceFields | None = None) -> C1Record:
    """min u and eps0 = min u^2 / phi(r)^2 (|V| = phi for V = phi d_r)."""
    f = fields or surface_fields(graph)
    ratio = f.u**2 / f.phi**2
    return C1Record(float(f.u.min()), float(min(ratio.min(), 1.0)), int(np.argmin(f.u)))


def p_range_constant(graph: RadialGraph, k: int, fields: SurfaceFields | None = None) -> float:
    """1 + eps0 (k - 1)."""
    if k < 1:
        raise DomainError("k must be >= 1")
    return 1.0 + c1_monitor(graph, fields).epsilon0 * (k - 1)


class QField(NamedTuple):
    values: np.ndarray
    max_value: float
    argmax: int
    critical_residual: float


def q_field(graph: RadialGraph, N: float, alpha: float, a: float, fields: SurfaceFields | None = None) -> QField:
    """Q = log kappa_1 - N log(u - a) + alpha Phi(r) at every node.

    ``critical_residual`` is the Sigma-norm of the difference-stencil gradient
    of Q at the argmax, i.e. the defect of the first-order condition
    grad kappa_1 / kappa_1 = N grad u / (u - a) - alpha grad Phi there.
    """
    f = fields or surface_fields(graph)
    if np.any(f.u <= a):
        raise DomainError(f"u <= a={a:g} at node {int(np.argmax(f.u <= a))}")
    k1 = f.kappa[:, 0]
    if np.any(k1 <= 0):
        raise DomainError(f"kappa_1 <= 0 at node {int(np.argmax(k1 <= 0))}")
    Q = np.log(k1) - N * np.log(f.u - a) + alpha * f.Phi
    i = int(np.argmax(Q))
    gQ = graph.frame_derivatives(Q)[0][i]
    crit = float(np.sqrt(gQ @ np.linalg.solve(f.g[i], gQ)))
    return QField(Q, float(Q[i]), i, crit)


@dataclass
class EstimateReport:
    c0: C0Record
    min_u: float
    epsilon0: float
    kappa_max: float
    kappa_argmax: int
    q_max: float
    q_argmax: int
    q_params: dict
    p_range: float
    q_critical_residual: float = 0.0

    @property
    def passed(self) -> bool:
        return self.c0.passed

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "c0": dict(asdict(self.c0), passed=self.c0.passed),
            "c1": {"min_u": self.min_u, "epsilon0": self.epsilon0},
            "c2": {
                "kappa_max": self.kappa_max,
                "kappa_argmax": self.kappa_argmax,
                "q_max": self.q_max,
                "q_argmax": self.q_argmax,
                "q_critical_residual": self.q_critical_residual,
                "q_params": self.q_params,
            },
            "p_range": self.p_range,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EstimateReport":
        c0 = {k: v for k, v in d["c0"].items() if k != "passed"}
        return cls(
            c0=C0Record(**c0),
            min_u=d["c1"]["min_u"],
            epsilon0=d["c1"]["epsilon0"],
            kappa_max=d["c2"]["kappa_max"],
            kappa_argmax=d["c2"]["kappa_argmax"],
            q_max=d["c2"]["q_max"],
            q_argmax=d["c2"]["q_argmax"],
            q_params=d["c2"]["q_params"],
            p_range=d["p_range"],
            q_critical_residual=d["c2"].get("q_critical_residual", 0.0),
        )


def estimate_report(problem: Problem, graph: RadialGraph, N: float = 2.0, alpha: float = 1.0, a: float = 0.0) -> EstimateReport:
    c0 = barrier_check(problem, graph)
    f = surface_fields(graph)
    c1 = c1_monitor(graph, f)
    q = q_field(graph, N, alpha, a, f)
    k1 = f.kappa[:, 0]
    return EstimateReport(
        c0=c0,
        min_u=c1.min_u,
        epsilon0=c1.epsilon0,
        kappa_max=float(k1.max()),
        kappa_argmax=int(np.argmax(k1)),
        q_max=q.max_value,
        q_argmax=q.argmax,
        q_params={"N": N, "alpha": alpha, "a": a},
        p_range=1.0 + c1.epsilon0 * (problem.k - 1),
        q_critical_residual=q.critical_residual,
    )


@dataclass
class MonitorStep:
    step: int
    param: float | None
    kappa_max: float
    min_u: float
    min_r: float
    max_r: float
    slack_max: float | None = None
    slack_min: float | None = None
    barrier_pass: bool | None = None
    flags: list = field(default_factory=list)


@dataclass
class MonitorSeries:
    steps: list = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return any(s.flags for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {"format_version": FORMAT_VERSION, "flagged": self.flagged, "steps": [asdict(s) for s in self.steps]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "param", "kappa_max", "min_u", "min_r", "max_r", "slack_max", "slack_min", "flags"])
        for s in self.steps:
            w.writerow(
                [s.step, "" if s.param is None else repr(s.param)]
                + [repr(float(x)) for x in (s.kappa_max, s.min_u, s.min_r, s.max_r)]
                + ["" if x is None else repr(float(x)) for x in (s.slack_max, s.slack_min)]
                + [";".join(s.flags)]
            )
        return buf.getvalue()


def monitor_continuation(
    reports: ContinuationRun | Sequence[SolveReport],
    problem: Problem | None = None,
) -> MonitorSeries:
    """Series of kappa_max, min u and barrier slacks along a continuation.

    A step is flagged when kappa_max exceeds 10x the first step's value or
    min u drops below 1e-3 of it. Barrier slacks need the problem: pass the
    base problem together with a ContinuationRun, or a problem to be used
    for every report of a plain list.
    """
    run = reports if isinstance(reports, ContinuationRun) else None
    reps = list(reports)
    series = MonitorSeries()
    if not reps:
        return series
    k0, u0 = reps[0].kappa_max_history[-1], reps[0].min_u_history[-1]
    for i, rep in enumerate(reps):
        param = run.params[i] if run is not None else None
        s = MonitorStep(i, param, rep.kappa_max_history[-1], rep.min_u_history[-1], rep.min_r_history[-1], rep.max_r_history[-1])
        if problem is not None and rep.converged:
            prob = run.path.problem_at(problem, param) if run is not None else problem
            c0 = barrier_check(prob, rep.final_graph)
            s.slack_max, s.slack_min, s.barrier_pass = c0.slack_max, c0.slack_min, c0.passed
            if not c0.passed:
                s.flags.append("barrier")
        if s.kappa_max > KAPPA_GROWTH_FLAG * k0:
            s.flags.append("kappa_growth")
        if s.min_u < MIN_U_FLAG * u0:
            s.flags.append("min_u")
        if not rep.converged:
            s.flags.append("not_converged")
        series.steps.append(s)
    return series
