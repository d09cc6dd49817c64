"""Discrete geometry of star-shaped radial graphs in warped products.

The ambient space is ``I x_phi S^n`` with metric ``dr^2 + phi(r)^2 g_sphere``.
A graph ``r: S^n -> I`` is sampled either on a meridian grid (``axisym``, any
n, rotationally symmetric about the polar axis) or on a latitude-longitude
grid of S^2 (``grid_s2``). All tensors are expressed in an orthonormal frame
``e_i`` of the unit sphere, in which

    g_ij = phi^2 delta_ij + r_i r_j
    h_ij = (-phi r_ij + 2 phi' r_i r_j + phi^2 phi' delta_ij) / sqrt(phi^2 + |grad r|^2)
    u    = phi^2 / sqrt(phi^2 + |grad r|^2)

and the principal curvatures are the eigenvalues of the pencil (h, g).
Derivatives of nodal fields use second-order central differences; poles are
handled by even reflection (axisym) or by a quadratic fit to the first
latitude ring in geodesic normal coordinates (grid_s2).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.interpolate import CubicSpline

from .errors import DiscretizationError, DomainError, GeometryError
from .symfunc import PrincipalCurvatures

FORMAT_VERSION = 1
SPACE_FORMS = ("euclidean", "hyperbolic", "spherical")


class WarpValues(NamedTuple):
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    Phi: np.ndarray


@dataclass(frozen=True)
class Warp:
    """Warping function phi on the open working interval (lo, hi)."""

    kind: str
    lo: float
    hi: float
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in SPACE_FORMS + ("custom",):
            raise DomainError(f"unknown warp kind {self.kind!r}")
        if self.kind == "custom":
            r_tab, phi_tab = (np.asarray(a, dtype=float) for a in self.table)
            if r_tab.ndim != 1 or r_tab.shape != phi_tab.shape or r_tab.size < 4:
                raise DomainError("custom warp needs matching 1-D tables with at least 4 points")
            if r_tab[0] != 0.0 or np.any(np.diff(r_tab) <= 0):
                raise DomainError("custom warp table must start at r=0 and increase strictly")
            spline = CubicSpline(r_tab, phi_tab)
            object.__setattr__(self, "_spline", spline)
            object.__setattr__(self, "_d1", spline.derivative(1))
            object.__setattr__(self, "_d2", spline.derivative(2))
            object.__setattr__(self, "_prim", spline.antiderivative(1))
            probe = np.linspace(r_tab[0], r_tab[-1], 64 * r_tab.size)[1:]
            if np.any(spline(probe) <= 0) or np.any(self._d1(probe) <= 0):
                raise DomainError("custom warp must have phi > 0 and phi' > 0 on (0, r_max)")

    @classmethod
    def euclidean(cls) -> "Warp":
        return cls("euclidean", 0.0, math.inf)

    @classmethod
    def hyperbolic(cls) -> "Warp":
        return cls("hyperbolic", 0.0, math.inf)

    @classmethod
    def spherical(cls) -> "Warp":
        return cls("spherical", 0.0, math.pi / 2)

    @classmethod
    def custom(cls, r_table, phi_table) -> "Warp":
        r_table = tuple(float(x) for x in r_table)
        return cls("custom", 0.0, r_table[-1], (r_table, tuple(float(x) for x in phi_table)))

    @classmethod
    def named(cls, kind: str) -> "Warp":
        return {"euclidean": cls.euclidean, "hyperbolic": cls.hyperbolic, "spherical": cls.spherical}[kind]()

    def in_domain(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return (r > self.lo) & (r < self.hi) & np.isfinite(r)

    def check_domain(self, r) -> None:
        ok = self.in_domain(r)
        if not np.all(ok):
            bad = np.asarray(r, dtype=float).reshape(-1)[np.argmin(ok.reshape(-1))]
            raise DomainError(f"r={bad:g} outside the {self.kind} working interval ({self.lo:g}, {self.hi:g})")

    def values(self, r) -> WarpValues:
        """phi, phi', phi'' and Phi without a domain check (vectorised)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "euclidean":
            return WarpValues(r, np.ones_like(r), np.zeros_like(r), 0.5 * r * r)
        if self.kind == "hyperbolic":
            s = np.sinh(r)
            return WarpValues(s, np.cosh(r), s, 2.0 * np.sinh(0.5 * r) ** 2)
        if self.kind == "spherical":
            s = np.sin(r)
            return WarpValues(s, np.cos(r), -s, 2.0 * np.sin(0.5 * r) ** 2)
        return WarpValues(self._spline(r), self._d1(r), self._d2(r), self._prim(r))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "custom":
            d["r_table"] = list(self.table[0])
            d["phi_table"] = list(self.table[1])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Warp":
        if d.get("kind") == "custom":
            return cls.custom(d["r_table"], d["phi_table"])
        try:
            return cls.named(d["kind"])
        except KeyError as exc:
            raise DomainError(f"bad warp entry {d!r}") from exc


def eval_warp(w: Warp, r: float) -> tuple[float, float, float, float]:
    """``(phi, phi', phi'', Phi)`` at a point of the working interval."""
    w.check_domain(r)
    return tuple(float(x) for x in w.values(r))


# ----------------------------------------------------------------- graphs


@dataclass(eq=False)
class RadialGraph:
    """Nodal values of r on an axisymmetric or latitude-longitude grid.

    axisym: nodes theta_j = j pi / m_theta, j = 0..m_theta (poles included).
    grid_s2: node 0 is the north pole, then latitude rows i = 1..m_lat-1 of
    m_lon nodes each (longitude fastest), then the south pole.
    """

    mode: str
    n: int
    shape: tuple
    r: np.ndarray
    warp: Warp

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.r = np.array(self.r, dtype=float).reshape(-1)
        if self.mode == "axisym":
            (m,) = self.shape
            if self.n < 2 or m < 4:
                raise DomainError("axisym graphs need n >= 2 and m_theta >= 4")
        elif self.mode == "grid_s2":
            m_lat, m_lon = self.shape
            if self.n != 2:
                raise DomainError("grid_s2 graphs live over S^2 (n = 2)")
            if m_lat < 4 or m_lon < 8 or m_lon % 2:
                raise DomainError("grid_s2 needs m_lat >= 4 and even m_lon >= 8")
        else:
            raise DomainError(f"unknown graph mode {self.mode!r}")
        if self.r.size != self.num_nodes:
            raise DomainError(f"expected {self.num_nodes} nodal values, got {self.r.size}")
        if np.any(self.r <= 0):
            raise DomainError("radial function must be positive")
        self.warp.check_domain(self.r)

    # construction -----------------------------------------------------
    @classmethod
    def axisym(cls, n: int, m_theta: int, warp: Warp, r: float | np.ndarray | Callable = 1.0) -> "RadialGraph":
        theta = np.arange(m_theta + 1) * (math.pi / m_theta)
        vals = r(theta) if callable(r) else np.broadcast_to(np.asarray(r, dtype=float), theta.shape)
        return cls("axisym", n, (m_theta,), vals, warp)

    @classmethod
    def grid_s2(cls, m_lat: int, m_lon: int, warp: Warp, r: float | np.ndarray | Callable = 1.0) -> "RadialGraph":
        theta, lon = _grid_coords(m_lat, m_lon)
        vals = r(theta, lon) if callable(r) else np.broadcast_to(np.asarray(r, dtype=float), theta.shape)
        return cls("grid_s2", 2, (m_lat, m_lon), vals, warp)

    def with_r(self, r: np.ndarray) -> "RadialGraph":
        return RadialGraph(self.mode, self.n, self.shape, np.asarray(r, dtype=float).copy(), self.warp)

    # coordinates ------------------------------------------------------
    @property
    def num_nodes(self) -> int:
        if self.mode == "axisym":
            return self.shape[0] + 1
        m_lat, m_lon = self.shape
        return 2 + (m_lat - 1) * m_lon

    @property
    def theta(self) -> np.ndarray:
        if self.mode == "axisym":
            return np.arange(self.shape[0] + 1) * (math.pi / self.shape[0])
        return _grid_coords(*self.shape)[0]

    @property
    def lon(self) -> np.ndarray:
        if self.mode == "axisym":
            return np.zeros(self.num_nodes)
        return _grid_coords(*self.shape)[1]

    @property
    def mesh_size(self) -> float:
        """Polar spacing pi / m (the meridional step of either grid)."""
        return math.pi / self.shape[0]

    @property
    def pole_nodes(self) -> tuple[int, int]:
        return (0, self.num_nodes - 1)

    # differential operators -------------------------------------------
    def frame_derivatives(self, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Gradient (N, n) and Hessian (N, n, n) of a nodal field on S^n, in the
        orthonormal frame (d_theta, azimuthal unit vectors)."""
        f = np.asarray(f, dtype=float)
        if self.mode == "axisym":
            return _axisym_derivatives(f, self.shape[0], self.n)
        return _grid_derivatives(f, *self.shape)

    def frame_connection(self) -> np.ndarray:
        """W[node, k, i, m] with nabla_{e_k} e_i = sum_m W[k, i, m] e_m on the unit
        sphere (zero at the poles, where the frame is chosen parallel)."""
        N, n = self.num_nodes, self.n
        th = self.theta
        cot = np.zeros(N)
        interior = (th > 0) & (th < math.pi)
        cot[interior] = np.cos(th[interior]) / np.sin(th[interior])
        if self.mode == "grid_s2":
            cot[[0, N - 1]] = 0.0
        W = np.zeros((N, n, n, n))
        for a in range(1, n):
            W[:, a, 0, a] = cot
            W[:, a, a, 0] = -cot
        return W

    def stencil_pattern(self) -> sp.csr_matrix:
        """Boolean N x N matrix: row i lists the nodes the discrete operators at
        node i read."""
        N = self.num_nodes
        rows, cols = [], []
        if self.mode == "axisym":
            for j in range(N):
                for d in (-1, 0, 1):
                    if 0 <= j + d < N:
                        rows.append(j)
                        cols.append(j + d)
        else:
            m_lat, m_lon = self.shape
            south = N - 1

            def node(i, j):
                if i <= 0:
                    return 0
                if i >= m_lat:
                    return south
                return 1 + (i - 1) * m_lon + (j % m_lon)

            for pole, ring in ((0, 1), (south, m_lat - 1)):
                for j in range(m_lon):
                    rows.append(pole)
                    cols.append(node(ring, j))
                rows.append(pole)
                cols.append(pole)
            for i in range(1, m_lat):
                for j in range(m_lon):
                    me = node(i, j)
                    for di in (-1, 0, 1):
                        for dj in (-1, 0, 1):
                            rows.append(me)
                            cols.append(node(i + di, j + dj))
        data = np.ones(len(rows), dtype=bool)
        pat = sp.csr_matrix((data, (rows, cols)), shape=(N, N))
        pat.sum_duplicates()
        return pat

    # serialisation ----------------------------------------------------
    def to_dict(self) -> dict:
        d = {"format_version": FORMAT_VERSION, "mode": self.mode, "n": self.n, "warp": self.warp.to_dict()}
        if self.mode == "axisym":
            d["m_theta"] = self.shape[0]
        else:
            d["m_lat"], d["m_lon"] = self.shape
        d["r"] = [float(x) for x in self.r]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RadialGraph":
        warp = Warp.from_dict(d["warp"])
        if d["mode"] == "axisym":
            shape = (d["m_theta"],)
        else:
            shape = (d["m_lat"], d["m_lon"])
        return cls(d["mode"], int(d["n"]), shape, np.asarray(d["r"], dtype=float), warp)


def _grid_coords(m_lat: int, m_lon: int) -> tuple[np.ndarray, np.ndarray]:
    th_rows = np.arange(1, m_lat) * (math.pi / m_lat)
    lon_cols = np.arange(m_lon) * (2 * math.pi / m_lon)
    th = np.concatenate([[0.0], np.repeat(th_rows, m_lon), [math.pi]])
    lon = np.concatenate([[0.0], np.tile(lon_cols, m_lat - 1), [0.0]])
    return th, lon


def _axisym_derivatives(f: np.ndarray, m: int, n: int):
    h = math.pi / m
    fg = np.concatenate([[f[1]], f, [f[-2]]])
    d1 = (fg[2:] - fg[:-2]) / (2 * h)
    d2 = (fg[2:] - 2 * fg[1:-1] + fg[:-2]) / h**2
    th = np.arange(m + 1) * h
    az = np.empty_like(d1)
    az[1:-1] = d1[1:-1] * np.cos(th[1:-1]) / np.sin(th[1:-1])
    # L'Hopital at the poles: f' cot(theta) -> f''
    az[0], az[-1] = d2[0], d2[-1]
    N = f.size
    grad = np.zeros((N, n))
    grad[:, 0] = d1
    hess = np.zeros((N, n, n))
    hess[:, 0, 0] = d2
    for a in range(1, n):
        hess[:, a, a] = az
    return grad, hess


def _grid_derivatives(f: np.ndarray, m_lat: int, m_lon: int, pole_rows: np.ndarray | None = None):
    # pole_rows overrides the pole value seen from each longitude (tensor
    # components rotated into the local meridian frame)
    N = f.size
    ht, hl = math.pi / m_lat, 2 * math.pi / m_lon
    F = np.empty((m_lat + 1, m_lon))
    F[0] = f[0] if pole_rows is None else pole_rows[0]
    F[-1] = f[-1] if pole_rows is None else pole_rows[1]
    F[1:-1] = f[1:-1].reshape(m_lat - 1, m_lon)
    th = (np.arange(1, m_lat) * ht)[:, None]
    s, c = np.sin(th), np.cos(th)
    up, mid, dn = F[2:], F[1:-1], F[:-2]
    roll = lambda A, k: np.roll(A, -k, axis=1)
    f_t = (up - dn) / (2 * ht)
    f_l = (roll(mid, 1) - roll(mid, -1)) / (2 * hl)
    f_tt = (up - 2 * mid + dn) / ht**2
    f_ll = (roll(mid, 1) - 2 * mid + roll(mid, -1)) / hl**2
    f_tl = (roll(up, 1) - roll(up, -1) - roll(dn, 1) + roll(dn, -1)) / (4 * ht * hl)
    grad = np.zeros((N, 2))
    hess = np.zeros((N, 2, 2))
    grad[1:-1, 0] = f_t.ravel()
    grad[1:-1, 1] = (f_l / s).ravel()
    hess[1:-1, 0, 0] = f_tt.ravel()
    off = ((f_tl - c / s * f_l) / s).ravel()
    hess[1:-1, 0, 1] = off
    hess[1:-1, 1, 0] = off
    hess[1:-1, 1, 1] = (f_ll / s**2 + c / s * f_t).ravel()
    lam = np.arange(m_lon) * hl
    cl, sl, c2, s2 = np.cos(lam), np.sin(lam), np.cos(2 * lam), np.sin(2 * lam)
    if pole_rows is not None:
        return grad, hess
    for node, ring in ((0, F[1]), (N - 1, F[-2])):
        dv = ring - f[node]
        a = 2.0 / (m_lon * ht) * np.dot(dv, cl)
        b = 2.0 / (m_lon * ht) * np.dot(dv, sl)
        tr = 4.0 * dv.mean() / ht**2
        diff = 8.0 / (m_lon * ht**2) * np.dot(dv, c2)
        d = 4.0 / (m_lon * ht**2) * np.dot(dv, s2)
        grad[node] = (a, b)
        hess[node] = ((0.5 * (tr + diff), d), (d, 0.5 * (tr - diff)))
    return grad, hess


# ---------------------------------------------------------- point geometry


@dataclass
class SurfaceFields:
    """Per-node geometry of a graph; arrays are indexed by node first."""

    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    Phi: np.ndarray
    grad_r: np.ndarray
    hess_r: np.ndarray
    g: np.ndarray
    h: np.ndarray
    kappa: np.ndarray
    u: np.ndarray


def _metric_and_form(graph: RadialGraph):
    wv = graph.warp.values(graph.r)
    rg, rh = graph.frame_derivatives(graph.r)
    n = graph.n
    eye = np.eye(n)
    phi, dphi = wv.phi[:, None, None], wv.dphi[:, None, None]
    rr = rg[:, :, None] * rg[:, None, :]
    grad2 = np.sum(rg**2, axis=1)
    W = np.sqrt(wv.phi**2 + grad2)
    g = phi**2 * eye + rr
    h = (-phi * rh + 2 * dphi * rr + phi**2 * dphi * eye) / W[:, None, None]
    h = 0.5 * (h + h.swapaxes(1, 2))
    return wv, rg, rh, g, h, W


def surface_fields(graph: RadialGraph) -> SurfaceFields:
    """Geometry at every node; principal curvatures via Cholesky reduction of g."""
    wv, rg, rh, g, h, W = _metric_and_form(graph)
    try:
        L = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        bad = int(np.argmin(np.linalg.eigvalsh(g)[:, 0]))
        raise DiscretizationError(f"induced metric not positive definite at node {bad}", node=bad)
    X = np.linalg.solve(L, h)
    C = np.linalg.solve(L, X.swapaxes(1, 2))
    C = 0.5 * (C + C.swapaxes(1, 2))
    kappa = np.linalg.eigvalsh(C)[:, ::-1]
    u = wv.phi**2 / W
    if np.any(u <= 0) or not np.all(np.isfinite(kappa)):
        bad = int(np.argmax((u <= 0) | ~np.all(np.isfinite(kappa), axis=1)))
        raise GeometryError(f"degenerate geometry at node {bad}", node=bad)
    return SurfaceFields(graph.r, wv.phi, wv.dphi, wv.Phi, rg, rh, g, h, kappa, u)


@dataclass
class PointFrameData:
    node: int
    g: np.ndarray
    g_inv: np.ndarray
    h: np.ndarray
    kappa: PrincipalCurvatures
    u: float
    grad_r: np.ndarray


def fundamental_forms(graph: RadialGraph, node: int) -> PointFrameData:
    """Metric, second fundamental form and principal curvatures at one node."""
    if not 0 <= node < graph.num_nodes:
        raise DomainError(f"node {node} outside 0..{graph.num_nodes - 1}")
    wv, rg, rh, g, h, W = _metric_and_form(graph)
    gi, hi, ri = g[node], h[node], rg[node]
    phi = wv.phi[node]
    g_inv = (np.eye(graph.n) - np.outer(ri, ri) / (phi**2 + ri @ ri)) / phi**2
    try:
        kappa = scipy.linalg.eigh(hi, gi, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise DiscretizationError(f"induced metric not positive definite at node {node}", node=node) from exc
    return PointFrameData(
        node=node,
        g=gi,
        g_inv=g_inv,
        h=hi,
        kappa=PrincipalCurvatures.from_values(kappa),
        u=float(phi**2 / W[node]),
        grad_r=ri,
    )


# ------------------------------------------------------- identity checks


def _connection_difference(fields: SurfaceFields) -> np.ndarray:
    """S[node, l, i, j] = Gamma(Sigma) - Gamma(S^n) in the frame e_i."""
    rg, rh = fields.grad_r, fields.hess_r
    pp = (fields.phi * fields.dphi)[:, None, None, None]
    n = rg.shape[1]
    eye = np.eye(n)
    # T[m, i, j] = phi phi' (r_i d_jm + r_j d_im - r_m d_ij) + r_ij r_m
    T = (
        pp
        * (
            np.einsum("bi,jm->bmij", rg, eye)
            + np.einsum("bj,im->bmij", rg, eye)
            - np.einsum("bm,ij->bmij", rg, eye)
        )
        + np.einsum("bij,bm->bmij", rh, rg)
    )
    return np.einsum("blm,bmij->blij", np.linalg.inv(fields.g), T)


class IdentityReport(NamedTuple):
    mesh_size: float
    gradient_u: float
    hessian_Phi: float
    gradient_u_node: int
    hessian_Phi_node: int


def _node_mask(graph: RadialGraph, pole_rings: int) -> np.ndarray:
    """Nodes at least ``pole_rings`` + 1 grid steps away from both poles."""
    if pole_rings <= 0:
        return np.ones(graph.num_nodes, dtype=bool)
    steps = np.rint(graph.theta / graph.mesh_size)
    return (steps > pole_rings) & (steps < graph.shape[0] - pole_rings)


def check_geometric_identities(graph: RadialGraph, skip_pole_rings: int = 0) -> IdentityReport:
    """Max nodal residuals of grad u = h g^{-1} grad Phi and
    Hess_Sigma Phi = phi' g - u h, with derivatives of the nodal fields u
    and Phi(r) taken by the graph's difference stencils.

    Lat-long stencils lose one order on the rings next to the poles (the
    cot(theta) terms scale like 1/h there); ``skip_pole_rings`` drops the poles
    and that many rings on each side from the maxima.
    """
    f = surface_fields(graph)
    gu, _ = graph.frame_derivatives(f.u)
    gP, HP = graph.frame_derivatives(f.Phi)
    hg = np.einsum("bik,bkl->bil", f.h, np.linalg.inv(f.g))
    res1 = np.abs(gu - np.einsum("bil,bl->bi", hg, gP)).max(axis=1)
    S = _connection_difference(f)
    lhs = HP - np.einsum("blij,bl->bij", S, gP)
    rhs = f.dphi[:, None, None] * f.g - f.u[:, None, None] * f.h
    res2 = np.abs(lhs - rhs).max(axis=(1, 2))
    keep = _node_mask(graph, skip_pole_rings)
    res1 = np.where(keep, res1, 0.0)
    res2 = np.where(keep, res2, 0.0)
    return IdentityReport(
        graph.mesh_size, float(res1.max()), float(res2.max()), int(np.argmax(res1)), int(np.argmax(res2))
    )


def _pole_frame_rows(T: np.ndarray, graph: RadialGraph) -> np.ndarray:
    """Pole tensors T[pole] re-expressed in the meridian frame (e_theta, e_lon)
    of every longitude; shape (2, m_lon, 2, 2)."""
    m_lon = graph.shape[1]
    lam = np.arange(m_lon) * (2 * math.pi / m_lon)
    c, s = np.cos(lam), np.sin(lam)
    out = np.empty((2, m_lon, 2, 2))
    for row, node, sign in ((0, 0, 1.0), (1, graph.num_nodes - 1, -1.0)):
        # columns: e_theta = sign (cos, sin), e_lon = (-sin, cos) in pole coordinates
        P = np.stack([np.stack([sign * c, sign * s], -1), np.stack([-s, c], -1)], -1)
        out[row] = np.einsum("lai,ab,lbj->lij", P, T[node], P)
    return out


class CodazziReport(NamedTuple):
    mesh_size: float
    max_defect: float
    max_weighted_defect: float
    worst_node: int


def codazzi_defect(graph: RadialGraph, skip_pole_rings: int = 0) -> CodazziReport:
    """Defect of nabla_k h_ij = nabla_j h_ik in an orthonormal frame of Sigma.

    Valid in space forms, where the ambient curvature term vanishes. Poles
    are excluded (the frame is singular there). ``max_weighted_defect``
    multiplies the defect by sin(theta): next to a pole the cot(theta)
    connection terms amplify O(h^2) curvature errors to O(h), and the
    weighted norm is the one that converges at second order.
    """
    if graph.warp.kind not in SPACE_FORMS:
        raise NotImplementedError("codazzi_defect needs a space-form warp (euclidean, hyperbolic, spherical)")
    f = surface_fields(graph)
    N, n = graph.num_nodes, graph.n
    dh = np.empty((N, n, n, n))  # dh[b, k, i, j] = e_k(h_ij)
    poles = _pole_frame_rows(f.h, graph) if graph.mode == "grid_s2" else None
    for i in range(n):
        for j in range(n):
            if poles is None:
                dh[:, :, i, j] = graph.frame_derivatives(f.h[:, i, j])[0]
            else:
                dh[:, :, i, j] = _grid_derivatives(f.h[:, i, j], *graph.shape, poles[:, :, i, j])[0]
    Wc = graph.frame_connection()
    S = _connection_difference(f)
    # nabla'_k h_ij on the sphere, then the Sigma correction
    nab = dh - np.einsum("bkim,bmj->bkij", Wc, f.h) - np.einsum("bkjm,bim->bkij", Wc, f.h)
    nab -= np.einsum("blki,blj->bkij", S, f.h) + np.einsum("blkj,bil->bkij", S, f.h)
    T = nab - nab.transpose(0, 3, 2, 1)
    Linv = np.linalg.inv(np.linalg.cholesky(f.g))
    To = np.einsum("bak,bci,bdj,bkij->bacd", Linv, Linv, Linv, T)
    d = np.abs(To).max(axis=(1, 2, 3))
    d[list(graph.pole_nodes)] = 0.0
    d[~_node_mask(graph, skip_pole_rings)] = 0.0
    wd = d * np.sin(graph.theta)
    return CodazziReport(graph.mesh_size, float(d.max()), float(wd.max()), int(np.argmax(wd)))


# ----------------------------------------------------------------- export


def graph_csv(graph: RadialGraph, fields: SurfaceFields | None = None) -> str:
    """Per-node CSV: theta[, lon], r, kappa_1..kappa_n, u."""
    f = fields or surface_fields(graph)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    coords = ["theta"] if graph.mode == "axisym" else ["theta", "lon"]
    w.writerow(["node"] + coords + ["r"] + [f"kappa_{i + 1}" for i in range(graph.n)] + ["u"])
    th, lon = graph.theta, graph.lon
    for b in range(graph.num_nodes):
        c = [repr(float(th[b]))] if graph.mode == "axisym" else [repr(float(th[b])), repr(float(lon[b]))]
        w.writerow([b] + c + [repr(float(f.r[b]))] + [repr(float(x)) for x in f.kappa[b]] + [repr(float(f.u[b]))])
    return buf.getvalue()
