"""Acceptance suite. Each test checks one criterion at its stated tolerance
and budget and prints a single PASS/FAIL line.

Run standalone with ``python tests/test_acceptance.py`` or through pytest;
the lines are printed with capture disabled so they show up in ``pytest -v``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from curvlab.campaigns import run_campaign
from curvlab.cli import main
from curvlab.estimates import MIN_U_FLAG, barrier_check, estimate_report, monitor_continuation
from curvlab.geometry import RadialGraph, Warp, check_geometric_identities, codazzi_defect, eval_warp, surface_fields
from curvlab.solver import ContinuationPath, Problem, PsiField, continuation, perturbed_init, solve

SEED = 1729
WARPS = ("euclidean", "hyperbolic", "spherical")
SOLVER_CASES = [
    ("euclidean", 2, 1, 1.0),
    ("euclidean", 2, 2, 1.0),
    ("hyperbolic", 5, 3, 1.0),
    ("hyperbolic", 6, 4, -1.0),
    ("spherical", 5, 4, 0.5),
]
RENWANG_PAIRS = [(3, 2), (4, 3), (5, 4), (5, 3), (6, 4)]


@pytest.fixture
def verdict(capsys):
    def emit(label: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} [{label}] {detail}")
        assert ok, detail

    return emit


def _pairs(k_lo: int, n_hi: int):
    return [[n, k] for n in range(1, n_hi + 1) for k in range(k_lo, n + 1)]


def test_criterion_1_sigma_identities(verdict):
    t0 = time.perf_counter()
    reps = run_campaign({"campaign": "identities", "pairs": _pairs(1, 10), "budget": 10_000}, SEED)
    wall = time.perf_counter() - t0
    bad = [r.params for r in reps if not r.passed]
    worst = {key: max(r.params[key] for r in reps) for key in ("max_split_error", "max_euler_error", "max_trace_error", "max_grad_fd_error", "max_hess_fd_error")}
    ok = not bad and len(reps) == 55 and wall < 30
    verdict("1 sigma_k identities", ok, f"{len(reps)} (n,k) pairs, failures={bad}, worst={worst}, {wall:.1f}s")


def test_criterion_2_cone_lemmas(verdict):
    names = ("negative-kappa", "kappa-sq-trace", "sigma-l-dominance", "quotient-concavity", "semiconvexity")
    t0 = time.perf_counter()
    counts = {}
    for name in names:
        reps = run_campaign({"campaign": name, "pairs": _pairs(2, 8), "budget": 100_000}, SEED)
        counts[name] = (sum(r.violation_count for r in reps), sum(r.samples_tested for r in reps))
    wall = time.perf_counter() - t0
    ok = all(v == 0 for v, _ in counts.values()) and wall < 300
    verdict("2 cone lemmas", ok, f"(violations, samples) {counts}, {wall:.1f}s")


def test_criterion_3_renwang_lu(verdict):
    t0 = time.perf_counter()
    pairs = [list(p) for p in RENWANG_PAIRS]
    rw = run_campaign({"campaign": "renwang", "pairs": pairs, "budget": 100_000, "thresholds": [10, 100, 1000]}, SEED)
    lu = run_campaign({"campaign": "lu", "pairs": pairs, "budget": 100_000, "eps": 0.1, "delta": 1 / 3, "delta0": 0.5}, SEED)
    wall = time.perf_counter() - t0
    rw_ok = len(rw) == 15 and all(r.passed and r.found_constant is not None for r in rw)
    lu_ok = len(lu) == sum(k - 1 for _, k in RENWANG_PAIRS) and all(r.passed and r.found_constant is not None for r in lu)
    betas = {(r.params["n"], r.params["k"], r.params["kappa1_threshold"]): r.found_constant for r in rw}
    deltas = {(r.params["n"], r.params["k"], r.params["l"]): r.found_constant for r in lu}
    verdict("3 Ren-Wang and Lu", rw_ok and lu_ok and wall < 900, f"beta={betas}, delta'={deltas}, {wall:.1f}s")


def test_criterion_4_geometry(verdict):
    sphere_err = 0.0
    for kind in WARPS:
        w = Warp.named(kind)
        for R in (0.5, 1.0, 1.3):
            phi, dphi, _, _ = eval_warp(w, R)
            for g in (RadialGraph.axisym(4, 32, w, R), RadialGraph.grid_s2(12, 24, w, R)):
                kap = surface_fields(g).kappa
                sphere_err = max(sphere_err, float(np.max(np.abs(kap - dphi / phi))) / (dphi / phi))
    orders = {}
    for kind in WARPS:
        w = Warp.named(kind)
        graphs = [RadialGraph.axisym(3, m, w, lambda th: 1 + 0.1 * np.cos(th)) for m in (32, 64, 128)]
        ids = [check_geometric_identities(g) for g in graphs]
        cod = [codazzi_defect(g) for g in graphs]
        series = {
            "gradient_u": [r.gradient_u for r in ids],
            "hessian_Phi": [r.hessian_Phi for r in ids],
            "codazzi": [r.max_weighted_defect for r in cod],
        }
        for name, vals in series.items():
            orders[(kind, name)] = [round(math.log2(vals[i] / vals[i + 1]), 3) for i in range(2)]
    order_ok = all(abs(q - 2.0) <= 0.3 for qs in orders.values() for q in qs)
    verdict("4 geometry exactness", sphere_err <= 1e-12 and order_ok, f"sphere rel err {sphere_err:.2e}, orders {orders}")


def _sphere_case(kind, n, k, p, R=1.0):
    prob = Problem(n, k, p, PsiField.sphere_exact(R), Warp.named(kind))
    return prob, solve(prob, perturbed_init(prob, R, 0.05))


@pytest.fixture(scope="module")
def sphere_solutions():
    out = {}
    for case in SOLVER_CASES:
        t0 = time.perf_counter()
        prob, rep = _sphere_case(*case)
        out[case] = (prob, rep, time.perf_counter() - t0)
    return out


def test_criterion_5_sphere_exact_solver(verdict, sphere_solutions):
    rows, ok = [], True
    for case, (prob, rep, wall) in sphere_solutions.items():
        dev = float(np.max(np.abs(rep.final_graph.r - 1.0))) if rep.final_graph is not None else math.inf
        good = rep.converged and rep.final_residual <= 1e-8 and dev <= 1e-6 and wall < 60
        ok &= good
        rows.append(f"{case}: iters={rep.iterations} res={rep.final_residual:.1e} |r-R|={dev:.1e} {wall:.1f}s")
    verdict("5 sphere-exact solver", ok, "; ".join(rows))


AMPLITUDE_CASES = [("euclidean", 2, 2, 1.0), ("hyperbolic", 5, 3, 1.0), ("spherical", 5, 4, 0.5)]


def test_criterion_6_estimate_monitors(verdict, sphere_solutions):
    ok, rows = True, []
    for case, (prob, rep, _) in sphere_solutions.items():
        est = estimate_report(prob, rep.final_graph)
        good = rep.converged and est.c0.passed and est.min_u >= MIN_U_FLAG
        ok &= good
        rows.append(f"{case}: barrier={est.c0.passed} min_u={est.min_u:.3f}")
    for kind, n, k, p in AMPLITUDE_CASES:
        prob = Problem(n, k, p, PsiField.sphere_exact(1.0), Warp.named(kind))
        psi1 = PsiField.from_expr(f"{float(prob.psi_values(prob.graph(1.0))[0])!r} * (1 + 0.2 * cos(theta))")
        path = ContinuationPath("amplitude", tuple(np.linspace(0.1, 1.0, 10)), psi1=psi1)
        run = continuation(prob, path, init=prob.graph(1.0))
        series = monitor_continuation(run, prob)
        k0 = series.steps[0].kappa_max if len(series) else math.nan
        kmax = max((s.kappa_max for s in series.steps), default=math.nan)
        min_u = min((s.min_u for s in series.steps), default=math.nan)
        good = run.completed and len(series) == 10 and not series.flagged and kmax < 10 * k0 and min_u >= MIN_U_FLAG
        good &= all(s.barrier_pass for s in series.steps)
        ok &= good
        rows.append(f"{(kind, n, k, p)} ramp: completed={run.completed} kappa_max/initial={kmax / k0:.3f} min_u={min_u:.3f}")
    verdict("6 estimate monitors", ok, "; ".join(rows))


def _run_all(out, cfg_dir):
    import json

    verify = cfg_dir / "verify.json"
    verify.write_text(json.dumps({"campaigns": [
        {"campaign": "quotient-concavity", "n": 5, "k_min": 2, "budget": 5000},
        {"campaign": "renwang", "n": 4, "k": 3, "budget": 2000, "thresholds": [100]},
        {"campaign": "lu", "n": 4, "k": 3, "budget": 2000},
    ]}))
    solve_cfg = cfg_dir / "solve.json"
    solve_cfg.write_text(json.dumps({
        "problem": {"n": 5, "k": 3, "p": 1.0, "warp": {"kind": "hyperbolic"}, "psi": {"kind": "sphere_exact", "R": 1.0}, "m_theta": 48},
        "init": {"R": 1.0, "perturbation": 0.05},
    }))
    cont = cfg_dir / "continue.json"
    cont.write_text(json.dumps({
        "problem": {"n": 3, "k": 2, "p": 1.0, "psi": 3.0, "m_theta": 32},
        "path": {"kind": "p", "values": [1.0, 0.5, 0.0]},
    }))
    codes = [
        main(["verify", "--config", str(verify), "--out", str(out), "--seed", "99", "--quiet"]),
        main(["sample-cone", "-n", "6", "-k", "3", "--count", "200", "--out", str(out), "--seed", "99", "--quiet"]),
        main(["solve", "--config", str(solve_cfg), "--out", str(out), "--quiet"]),
        main(["continue", "--config", str(cont), "--out", str(out), "--quiet"]),
    ]
    main(["report", str(out), "--out", str(out / "summary"), "--quiet"])
    return codes, {p.relative_to(out): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file() and not p.name.endswith(".meta.json")}


def test_criterion_7_determinism(verdict, tmp_path):
    codes_a, a = _run_all(tmp_path / "a", tmp_path)
    codes_b, b = _run_all(tmp_path / "b", tmp_path)
    same = a.keys() == b.keys() and all(a[key] == b[key] for key in a)
    diff = sorted(str(key) for key in a if a.get(key) != b.get(key))
    ok = same and codes_a == codes_b == [0, 0, 0, 0] and len(a) >= 10
    verdict("7 determinism", ok, f"{len(a)} files compared, exit codes {codes_a}, differing: {diff}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
