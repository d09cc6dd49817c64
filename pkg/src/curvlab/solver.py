"""Damped Newton solver for sigma_k(kappa) = u^p psi(X) on radial graphs.

The unknown is the nodal radius r. The Jacobian is assembled by central
differences over groups of structurally independent columns, and every
accepted iterate keeps the principal curvatures inside Gamma_k at every node.
"""

from __future__ import annotations

import ast
import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import (
    AdmissibilityError,
    ConfigError,
    DiscretizationError,
    DomainError,
    StallError,
)
from .geometry import RadialGraph, SurfaceFields, Warp, surface_fields
from .symfunc import cone_order, elementary

FORMAT_VERSION = 1
DEFAULT_TOL = {"axisym": 1e-10, "grid_s2": 1e-8}
ARMIJO = 1e-4
MAX_HALVINGS = 40
FD_STEP = 6e-6
LSTSQ_RCOND = 1e-12
ROUNDOFF = 64 * np.finfo(float).eps


# ----------------------------------------------------------------- psi fields

_EXPR_FUNCS = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "abs", "arctan")
}
_EXPR_CONSTS = {"pi": math.pi, "e": math.e}
_EXPR_VARS = ("r", "theta", "lon")
_EXPR_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def compile_expr(text: str):
    """Compile an arithmetic expression in r, theta, lon; anything beyond
    numbers, + - * / **, and a fixed set of numpy functions is rejected."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad psi expression {text!r}: {exc.msg}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _EXPR_NODES):
            raise ConfigError(f"psi expression may not contain {type(node).__name__}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _EXPR_FUNCS):
            raise ConfigError("psi expression may only call " + ", ".join(sorted(_EXPR_FUNCS)))
        if isinstance(node, ast.Call) and node.keywords:
            raise ConfigError("psi expression calls take positional arguments only")
        if isinstance(node, ast.Name) and node.id not in _EXPR_FUNCS and node.id not in _EXPR_CONSTS and node.id not in _EXPR_VARS:
            raise ConfigError(f"unknown name {node.id!r} in psi expression")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ConfigError("psi expression constants must be numbers")
    return compile(tree, "<psi>", "eval")


def sphere_psi(warp: Warp, n: int, k: int, p: float, R: float) -> float:
    """The psi for which the round sphere r = R solves the equation."""
    phi, dphi, _, _ = warp.values(R)
    return math.comb(n, k) * float(dphi) ** k * float(phi) ** (-k - p)


PSI_KINDS = ("constant", "sphere_exact", "expr", "table", "blend")


@dataclass(frozen=True)
class PsiField:
    """Right-hand side psi(X); ``expr`` is evaluated in r, theta, lon."""

    kind: str
    value: float | None = None
    R: float | None = None
    expr: str | None = None
    values: tuple | None = None
    t: float | None = None
    psi0: "PsiField | None" = None
    psi1: "PsiField | None" = None

    def __post_init__(self):
        need = {"constant": "value", "sphere_exact": "R", "expr": "expr", "table": "values", "blend": "t"}
        if self.kind not in need:
            raise ConfigError(f"unknown psi kind {self.kind!r}")
        if getattr(self, need[self.kind]) is None:
            raise ConfigError(f"psi kind {self.kind!r} needs field {need[self.kind]!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ConfigError("constant psi must be positive")
        if self.kind == "expr":
            compile_expr(self.expr)
        if self.kind == "blend" and (self.psi0 is None or self.psi1 is None):
            raise ConfigError("blend psi needs psi0 and psi1")

    @classmethod
    def constant(cls, value: float) -> "PsiField":
        return cls("constant", value=float(value))

    @classmethod
    def sphere_exact(cls, R: float) -> "PsiField":
        return cls("sphere_exact", R=float(R))

    @classmethod
    def from_expr(cls, text: str) -> "PsiField":
        return cls("expr", expr=text)

    @classmethod
    def table(cls, values) -> "PsiField":
        return cls("table", values=tuple(float(v) for v in values))

    @classmethod
    def blend(cls, t: float, psi0: "PsiField", psi1: "PsiField") -> "PsiField":
        return cls("blend", t=float(t), psi0=psi0, psi1=psi1)

    @property
    def is_constant(self) -> bool:
        if self.kind == "blend":
            return self.psi0.is_constant and self.psi1.is_constant
        return self.kind in ("constant", "sphere_exact")

    def evaluate(self, problem: "Problem", r, theta, lon) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            out = np.full_like(r, self.value)
        elif self.kind == "sphere_exact":
            out = np.full_like(r, sphere_psi(problem.warp, problem.n, problem.k, problem.p, self.R))
        elif self.kind == "expr":
            env = dict(_EXPR_FUNCS, **_EXPR_CONSTS, r=r, theta=np.asarray(theta), lon=np.asarray(lon))
            with np.errstate(all="ignore"):
                out = np.broadcast_to(np.asarray(eval(compile_expr(self.expr), {"__builtins__": {}}, env), dtype=float), r.shape).copy()
        elif self.kind == "table":
            out = np.asarray(self.values, dtype=float)
            if out.shape != r.shape:
                raise ConfigError(f"psi table has {out.size} values for {r.size} nodes")
        else:
            out = self.t * self.psi1.evaluate(problem, r, theta, lon) + (1 - self.t) * self.psi0.evaluate(problem, r, theta, lon)
        if not np.all(np.isfinite(out)) or np.any(out <= 0):
            raise DomainError("psi must be finite and positive at every node")
        return out

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "sphere_exact":
            return {"kind": "sphere_exact", "R": self.R}
        if self.kind == "expr":
            return {"kind": "expr", "expr": self.expr}
        if self.kind == "table":
            return {"kind": "table", "values": list(self.values)}
        return {"kind": "blend", "t": self.t, "psi0": self.psi0.to_dict(), "psi1": self.psi1.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "PsiField":
        if isinstance(d, (int, float)) and not isinstance(d, bool):
            return cls.constant(d)
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError(f"bad psi entry {d!r}")
        kind = d["kind"]
        try:
            if kind == "constant":
                return cls.constant(d["value"])
            if kind == "sphere_exact":
                return cls.sphere_exact(d["R"])
            if kind == "expr":
                return cls.from_expr(str(d["expr"]))
            if kind == "table":
                return cls.table(d["values"])
            if kind == "blend":
                return cls.blend(d["t"], cls.from_dict(d["psi0"]), cls.from_dict(d["psi1"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad psi entry {d!r}: {exc}") from exc
        raise ConfigError(f"unknown psi kind {kind!r}")


# ------------------------------------------------------------------- problem


@dataclass(frozen=True)
class Problem:
    n: int
    k: int
    p: float
    psi: PsiField
    warp: Warp
    mode: str = "axisym"
    shape: tuple = (64,)

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ConfigError(f"need 1 <= k <= n, got n={self.n}, k={self.k}")
        if self.mode not in DEFAULT_TOL:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "grid_s2" and (self.n != 2 or len(self.shape) != 2):
            raise ConfigError("grid_s2 problems need n = 2 and shape (m_lat, m_lon)")
        if self.mode == "axisym" and len(self.shape) != 1:
            raise ConfigError("axisym problems need shape (m_theta,)")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def default_tol(self) -> float:
        return DEFAULT_TOL[self.mode]

    def graph(self, r) -> RadialGraph:
        """A graph of this problem's mode from a constant, array, or callable r."""
        if self.mode == "axisym":
            return RadialGraph.axisym(self.n, self.shape[0], self.warp, r)
        return RadialGraph.grid_s2(*self.shape, self.warp, r)

    def psi_values(self, graph: RadialGraph) -> np.ndarray:
        return self.psi.evaluate(self, graph.r, graph.theta, graph.lon)

    def to_dict(self) -> dict:
        d = {"n": self.n, "k": self.k, "p": self.p, "psi": self.psi.to_dict(), "warp": self.warp.to_dict(), "mode": self.mode}
        if self.mode == "axisym":
            d["m_theta"] = self.shape[0]
        else:
            d["m_lat"], d["m_lon"] = self.shape
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Problem":
        try:
            mode = d.get("mode", "axisym")
            shape = (d.get("m_theta", 64),) if mode == "axisym" else (d.get("m_lat", 16), d.get("m_lon", 32))
            if "psi" not in d:
                raise ConfigError("problem is missing the psi field")
            return cls(
                n=int(d["n"]),
                k=int(d["k"]),
                p=float(d.get("p", 0.0)),
                psi=PsiField.from_dict(d["psi"]),
                warp=Warp.from_dict(d.get("warp", {"kind": "euclidean"})),
                mode=mode,
                shape=shape,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad problem entry: {exc}") from exc


# ------------------------------------------------------------------ residual


class Evaluation(NamedTuple):
    F: np.ndarray
    fields: SurfaceFields
    rhs: np.ndarray


def evaluate(problem: Problem, graph: RadialGraph) -> Evaluation:
    """Residual plus the surface fields it was computed from."""
    f = surface_fields(graph)
    order = cone_order(f.kappa)
    bad = np.flatnonzero(order < problem.k)
    if bad.size:
        node = int(bad[0])
        raise AdmissibilityError(
            f"node {node} is not Gamma_{problem.k}-admissible (kappa in Gamma_{int(order[node])} only)", node=node
        )
    sk = elementary(f.kappa, problem.k, presorted=True)[:, problem.k]
    rhs = f.u**problem.p * problem.psi_values(graph)
    return Evaluation(sk - rhs, f, rhs)


def residual(problem: Problem, graph: RadialGraph) -> np.ndarray:
    """F[node] = sigma_k(kappa) - u^p psi at every node."""
    return evaluate(problem, graph).F


# ------------------------------------------------------------------ jacobian


def column_groups(pattern: sp.spmatrix) -> list[np.ndarray]:
    """Greedy colouring of Jacobian columns so that no two columns in a group
    share a nonzero row; each group costs one pair of residual evaluations."""
    P = sp.csc_matrix(pattern, dtype=np.int8)
    conflict = (P.T @ P).tolil()
    N = P.shape[1]
    color = -np.ones(N, dtype=int)
    for j in range(N):
        used = {color[i] for i in conflict.rows[j] if color[i] >= 0}
        c = 0
        while c in used:
            c += 1
        color[j] = c
    return [np.flatnonzero(color == c) for c in range(color.max() + 1)]


class _Structure(NamedTuple):
    pattern: sp.csc_matrix
    groups: list


_STRUCTURE_CACHE: dict = {}


def _structure(graph: RadialGraph) -> _Structure:
    key = (graph.mode, graph.n, graph.shape)
    if key not in _STRUCTURE_CACHE:
        pat = sp.csc_matrix(graph.stencil_pattern())
        _STRUCTURE_CACHE[key] = _Structure(pat, column_groups(pat))
    return _STRUCTURE_CACHE[key]


def jacobian(problem: Problem, graph: RadialGraph):
    """d F / d r by central differences; dense for axisym, CSR for grid_s2."""
    pat, groups = _structure(graph)
    N = graph.num_nodes
    steps = FD_STEP * np.maximum(1.0, np.abs(graph.r))
    rows, cols, vals = [], [], []
    for grp in groups:
        d = np.zeros(N)
        d[grp] = steps[grp]
        Fp = residual(problem, graph.with_r(graph.r + d))
        Fm = residual(problem, graph.with_r(graph.r - d))
        diff = Fp - Fm
        for j in grp:
            lo, hi = pat.indptr[j], pat.indptr[j + 1]
            ri = pat.indices[lo:hi]
            rows.append(ri)
            cols.append(np.full(ri.size, j))
            vals.append(diff[ri] / (2 * steps[j]))
    J = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
    return J.toarray() if graph.mode == "axisym" else J


def _linear_solve(J, F: np.ndarray) -> np.ndarray:
    if sp.issparse(J):
        with np.errstate(all="ignore"):
            dr = spla.spsolve(sp.csc_matrix(J), -F)
        if np.all(np.isfinite(dr)):
            return dr
        J = J.toarray()
    # minimum-norm least squares: tolerates the near-kernel of translation modes
    return np.linalg.lstsq(J, -F, rcond=LSTSQ_RCOND)[0]


# -------------------------------------------------------------------- newton


class StepInfo(NamedTuple):
    graph: RadialGraph
    step_norm: float
    residual_norm: float
    alpha: float
    breaches: int
    evaluation: Evaluation


def _newton_step(problem: Problem, graph: RadialGraph, damping: float = 1.0, current: Evaluation | None = None) -> StepInfo:
    cur = current or evaluate(problem, graph)
    norm0 = float(np.max(np.abs(cur.F)))
    dr = _linear_solve(jacobian(problem, graph), cur.F)
    # residuals at rounding level cannot decrease further; accept them
    floor = ROUNDOFF * max(1.0, float(np.max(np.abs(cur.rhs))))
    alpha = float(damping)
    breaches = 0
    last = "no trial step"
    for _ in range(MAX_HALVINGS + 1):
        trial_r = graph.r + alpha * dr
        try:
            trial = graph.with_r(trial_r)
            ev = evaluate(problem, trial)
        except (AdmissibilityError, DiscretizationError, DomainError) as exc:
            breaches += 1
            last = f"{type(exc).__name__}: {exc}"
        else:
            norm = float(np.max(np.abs(ev.F)))
            if norm <= (1 - ARMIJO * alpha) * norm0 or norm <= floor:
                return StepInfo(trial, float(np.max(np.abs(alpha * dr))), norm, alpha, breaches, ev)
            last = f"residual {norm:.3e} not below {norm0:.3e}"
        alpha *= 0.5
    err = StallError(f"line search exhausted {MAX_HALVINGS} halvings (last trial: {last})")
    err.breaches = breaches
    err.residual_norm = norm0
    raise err


def newton_step(problem: Problem, graph: RadialGraph, damping: float = 1.0) -> tuple[RadialGraph, float]:
    """One damped Newton step with an admissibility-preserving line search.

    Returns the accepted graph and the max-norm of the applied update.
    """
    info = _newton_step(problem, graph, damping)
    return info.graph, info.step_norm


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list)
    final_graph: RadialGraph | None = None
    kappa_max_history: list = field(default_factory=list)
    min_u_history: list = field(default_factory=list)
    min_r_history: list = field(default_factory=list)
    max_r_history: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    admissibility_breaches: int = 0
    tol: float = DEFAULT_TOL["axisym"]
    error: str | None = None
    wall_time: float = 0.0

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else math.nan

    def to_dict(self) -> dict:
        # wall time goes to the metadata sidecar, not the report body
        return {
            "format_version": FORMAT_VERSION,
            "converged": self.converged,
            "iterations": self.iterations,
            "tol": self.tol if math.isfinite(self.tol) else {"sentinel": "+inf"},
            "error": self.error,
            "admissibility_breaches": self.admissibility_breaches,
            "residual_history": self.residual_history,
            "kappa_max_history": self.kappa_max_history,
            "min_u_history": self.min_u_history,
            "min_r_history": self.min_r_history,
            "max_r_history": self.max_r_history,
            "step_norms": self.step_norms,
            "final_graph": self.final_graph.to_dict() if self.final_graph is not None else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        tol = d.get("tol", DEFAULT_TOL["axisym"])
        return cls(
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            residual_history=list(d.get("residual_history", [])),
            final_graph=RadialGraph.from_dict(d["final_graph"]) if d.get("final_graph") else None,
            kappa_max_history=list(d.get("kappa_max_history", [])),
            min_u_history=list(d.get("min_u_history", [])),
            min_r_history=list(d.get("min_r_history", [])),
            max_r_history=list(d.get("max_r_history", [])),
            step_norms=list(d.get("step_norms", [])),
            admissibility_breaches=int(d.get("admissibility_breaches", 0)),
            tol=math.inf if isinstance(tol, dict) else float(tol),
            error=d.get("error"),
        )

    def iteration_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iter", "max_residual", "kappa_max", "min_u", "min_r", "max_r"])
        for i, row in enumerate(
            zip(self.residual_history, self.kappa_max_history, self.min_u_history, self.min_r_history, self.max_r_history)
        ):
            w.writerow([i] + [repr(float(x)) for x in row])
        return buf.getvalue()


def _record(report: SolveReport, graph: RadialGraph, ev: Evaluation) -> None:
    report.residual_history.append(float(np.max(np.abs(ev.F))))
    report.kappa_max_history.append(float(ev.fields.kappa[:, 0].max()))
    report.min_u_history.append(float(ev.fields.u.min()))
    report.min_r_history.append(float(graph.r.min()))
    report.max_r_history.append(float(graph.r.max()))


def solve(
    problem: Problem,
    init: RadialGraph | None = None,
    tol: float | None = None,
    max_iter: int = 50,
    damping: float = 1.0,
) -> SolveReport:
    """Iterate Newton steps until the residual max-norm is at most ``tol``.

    Failures (inadmissible start, stalled line search, iteration cap) are
    recorded in the report rather than raised.
    """
    t0 = time.perf_counter()
    tol = problem.default_tol if tol is None else float(tol)
    graph = init if init is not None else default_init(problem)
    report = SolveReport(converged=False, iterations=0, final_graph=graph, tol=tol)
    try:
        ev = evaluate(problem, graph)
    except (AdmissibilityError, DiscretizationError, DomainError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        report.wall_time = time.perf_counter() - t0
        return report
    _record(report, graph, ev)
    while True:
        if report.residual_history[-1] <= tol:
            report.converged = True
            break
        if report.iterations >= max_iter:
            report.error = f"iteration cap {max_iter} reached"
            break
        try:
            info = _newton_step(problem, graph, damping, ev)
        except StallError as exc:
            report.admissibility_breaches += getattr(exc, "breaches", 0)
            report.error = f"StallError: {exc}"
            break
        except (np.linalg.LinAlgError, AdmissibilityError, DiscretizationError, DomainError) as exc:
            report.error = f"{type(exc).__name__}: {exc}"
            break
        graph, ev = info.graph, info.evaluation
        report.iterations += 1
        report.admissibility_breaches += info.breaches
        report.step_norms.append(info.step_norm)
        report.final_graph = graph
        _record(report, graph, ev)
    report.wall_time = time.perf_counter() - t0
    return report


# ------------------------------------------------------------ initialisation


def _radius_scan(warp: Warp) -> np.ndarray:
    if warp.kind == "spherical":
        return np.linspace(1e-3, math.pi / 2 - 1e-3, 2000)
    if warp.kind == "custom":
        return np.linspace(warp.hi * 1e-3, warp.hi * (1 - 1e-6), 2000)
    return np.geomspace(1e-3, 30.0, 4000)


def _scan_roots(warp: Warp, f) -> list[float]:
    grid = _radius_scan(warp)
    with np.errstate(all="ignore"):
        vals = np.array([f(R) for R in grid])
    ok = np.isfinite(vals)
    roots = [float(R) for R, v in zip(grid, vals) if v == 0.0]
    for a, b, fa, fb, oa, ob in zip(grid[:-1], grid[1:], vals[:-1], vals[1:], ok[:-1], ok[1:]):
        if oa and ob and fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200))
    return roots


def round_radius(warp: Warp, n: int, k: int, p: float, psi, hint: float | None = None) -> float:
    """Radius R of a round sphere solving the equation with constant psi, i.e.
    C(n,k) phi'(R)^k phi(R)^(-k-p) = psi. ``psi`` may also be a function of R.
    With several roots, the one closest to ``hint`` (default 1) is returned."""
    if callable(psi):
        f = lambda R: math.log(sphere_psi(warp, n, k, p, R)) - math.log(psi(R))
    else:
        if not psi > 0:
            raise DomainError("psi must be positive")
        f = lambda R: math.log(sphere_psi(warp, n, k, p, R)) - math.log(psi)
    roots = _scan_roots(warp, f)
    if not roots:
        raise DomainError(f"no round sphere solves the equation for this psi in the {warp.kind} working interval")
    target = 1.0 if hint is None else hint
    return min(roots, key=lambda R: (abs(R - target), R))


def default_init(problem: Problem, hint: float | None = None) -> RadialGraph:
    """Round sphere on which sigma_k matches the node-averaged u^p psi.

    For non-constant psi the average is taken over the round graph of the
    trial radius itself; if no radius balances it, the hint (or 1) is used.
    """
    psi = problem.psi
    if psi.kind == "sphere_exact" and hint is None:
        hint = psi.R
    R = 1.0 if hint is None else hint
    if not problem.warp.in_domain(R):
        R = 0.5 * problem.warp.hi if math.isfinite(problem.warp.hi) else 1.0
    if psi.is_constant:
        R = round_radius(problem.warp, problem.n, problem.k, problem.p, float(problem.psi_values(problem.graph(R))[0]), hint=R)
        return problem.graph(R)

    def mean_psi(rad):
        try:
            return float(np.mean(problem.psi_values(problem.graph(rad))))
        except DomainError:
            return math.nan

    try:
        R = round_radius(problem.warp, problem.n, problem.k, problem.p, mean_psi, hint=R)
    except DomainError:
        pass
    return problem.graph(R)


def perturbed_init(problem: Problem, R: float, amplitude: float) -> RadialGraph:
    """r = R (1 + amplitude cos theta)."""
    return problem.graph(lambda th, *lon: R * (1 + amplitude * np.cos(th)))


def init_from_dict(problem: Problem, d: dict | None) -> RadialGraph:
    """Initial graph from a config block: {"r": [...]} or {"R": .., "perturbation": ..}."""
    d = d or {}
    try:
        if "r" in d:
            return problem.graph(np.asarray(d["r"], dtype=float))
        if "R" not in d:
            base = default_init(problem)
            R = float(base.r[0])
        else:
            R = float(d["R"])
        return perturbed_init(problem, R, float(d.get("perturbation", 0.0)))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ConfigError, DomainError)):
            raise
        raise ConfigError(f"bad init entry {d!r}: {exc}") from exc


# -------------------------------------------------------------- continuation


@dataclass(frozen=True)
class ContinuationPath:
    """Parameter schedule: exponent p, or psi amplitude t in t psi1 + (1-t) psi0."""

    kind: str
    values: tuple
    psi0: PsiField | None = None
    psi1: PsiField | None = None

    def __post_init__(self):
        if self.kind not in ("p", "amplitude"):
            raise ConfigError(f"unknown continuation kind {self.kind!r}")
        if not self.values:
            raise ConfigError("continuation schedule is empty")
        if self.kind == "amplitude" and self.psi1 is None:
            raise ConfigError("amplitude continuation needs psi1")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def problem_at(self, base: Problem, value: float) -> Problem:
        if self.kind == "p":
            return replace(base, p=value)
        return replace(base, psi=PsiField.blend(value, self.psi0 or base.psi, self.psi1))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "values": list(self.values)}
        if self.psi0 is not None:
            d["psi0"] = self.psi0.to_dict()
        if self.psi1 is not None:
            d["psi1"] = self.psi1.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ContinuationPath":
        try:
            return cls(
                kind=d["kind"],
                values=tuple(d["values"]),
                psi0=PsiField.from_dict(d["psi0"]) if "psi0" in d else None,
                psi1=PsiField.from_dict(d["psi1"]) if "psi1" in d else None,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad continuation entry: {exc}") from exc


@dataclass
class ContinuationRun:
    path: ContinuationPath
    params: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    failure: dict | None = None

    @property
    def completed(self) -> bool:
        return self.failure is None and len(self.reports) == len(self.path.values)

    def __len__(self) -> int:
        return len(self.reports)

    def __iter__(self):
        return iter(self.reports)

    def __getitem__(self, i):
        return self.reports[i]


def continuation(
    problem: Problem,
    path: ContinuationPath,
    init: RadialGraph | None = None,
    tol: float | None = None,
    max_iter: int = 50,
    damping: float = 1.0,
) -> ContinuationRun:
    """Solve along ``path``, warm-starting each step from the previous solution.
    Stops at the first failed step and records it in ``failure``."""
    run = ContinuationRun(path)
    graph = init
    for step, value in enumerate(path.values):
        prob = path.problem_at(problem, value)
        if graph is None:
            graph = default_init(prob)
        rep = solve(prob, graph, tol=tol, max_iter=max_iter, damping=damping)
        run.params.append(value)
        run.reports.append(rep)
        if not rep.converged:
            run.failure = {"step": step, "param": value, "error": rep.error}
            break
        graph = rep.final_graph
    return run
