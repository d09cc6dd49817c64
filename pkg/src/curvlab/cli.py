"""Command-line front end: ``curvlab {verify,sample-cone,solve,continue,report}``.

Exit codes: 0 success, 1 scientific failure (violation, non-convergence,
failed barrier check), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import thread_count
from .campaigns import derive_seed, run_campaign
from .errors import ConfigError, DomainError
from .estimates import estimate_report, monitor_continuation
from .geometry import graph_csv
from .jsonio import read_json, write_json
from .solver import ContinuationPath, Problem, continuation, init_from_dict, solve
from .symfunc import cone_order, sample_cone_array

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DEFAULT_SEED = 1729
log = logging.getLogger("curvlab")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _meta(args, t0: float, **extra) -> dict:
    return {
        "command": args.command,
        "seed": args.seed,
        "threads": thread_count(args.threads),
        "version": __version__,
        "wall_time": round(time.perf_counter() - t0, 6),
        **extra,
    }


def _load_config(args) -> dict:
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    return read_json(args.config)


# ------------------------------------------------------------------ commands


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    entries = cfg.get("campaigns", [])
    if not isinstance(entries, list):
        raise ConfigError("'campaigns' must be a list")
    reports, times = [], []
    for entry in entries:
        for rep in run_campaign(entry, args.seed, args.threads):
            reports.append(rep)
            times.append({"campaign": rep.campaign, "params": rep.params, "wall_time": round(rep.wall_time, 6)})
            log.info(
                "%-18s %-28s tested=%-7d violations=%d%s",
                rep.campaign,
                ",".join(f"{k}={v}" for k, v in rep.params.items() if k in ("n", "k", "l", "kappa1_threshold")),
                rep.samples_tested,
                rep.violation_count,
                "" if rep.found_constant is None else f" constant={rep.found_constant:g}",
            )
    passed = all(r.passed for r in reports)
    body = {"kind": "verify", "seed": args.seed, "passed": passed, "reports": [r.to_dict() for r in reports]}
    write_json(Path(args.out) / "verify.json", body, _meta(args, t0, campaign_times=times))
    _write_text(Path(args.out) / "verify_worst.csv", _worst_csv(reports))
    return EXIT_OK if passed else EXIT_FAIL


def _worst_csv(reports) -> str:
    """Violations, else the tightest samples, of every report (plot-ready)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["campaign", "params", "kind", "rel_gap", "lhs", "rhs", "kappa"])
    for rep in reports:
        label = ";".join(f"{k}={v}" for k, v in rep.params.items() if not isinstance(v, (list, dict)))
        kind, rows = ("violation", rep.violations) if rep.violations else ("tightest", rep.tightest)
        for r in rows:
            w.writerow([rep.campaign, label, kind, repr(r["rel_gap"]), repr(r["lhs"]), repr(r["rhs"]), " ".join(repr(x) for x in r["kappa"])])
    return buf.getvalue()


def cmd_sample_cone(args) -> int:
    t0 = time.perf_counter()
    cfg = read_json(args.config) if args.config else {}
    try:
        n = int(args.n if args.n is not None else cfg["n"])
        k = int(args.k if args.k is not None else cfg["k"])
        count = int(args.count if args.count is not None else cfg.get("count", 1000))
        scale = float(args.scale if args.scale is not None else cfg.get("scale", 1.0))
    except KeyError as exc:
        raise ConfigError(f"sample-cone needs {exc.args[0]!r} (flag or config)") from exc
    seed = derive_seed(args.seed, "sample-cone", n, k)
    try:
        K = sample_cone_array(n, k, count, scale=scale, seed=seed)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    out = Path(args.out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"kappa_{i + 1}" for i in range(n)] + ["cone_order"])
    for row, order in zip(K, cone_order(K)):
        w.writerow([repr(float(x)) for x in row] + [int(order)])
    _write_text(out / "cone_samples.csv", buf.getvalue())
    body = {
        "kind": "cone_samples",
        "n": n,
        "k": k,
        "count": count,
        "scale": scale,
        "seed": args.seed,
        "kappa_1_range": [float(K[:, 0].min()), float(K[:, 0].max())],
        "min_cone_order": int(cone_order(K).min()),
    }
    write_json(out / "cone_samples.json", body, _meta(args, t0))
    log.info("wrote %d samples of Gamma_%d (n=%d)", count, k, n)
    return EXIT_OK


def _problem_block(cfg: dict) -> dict:
    block = cfg.get("problem", cfg)
    if not isinstance(block, dict):
        raise ConfigError("'problem' must be an object")
    return block


def _solve_opts(cfg: dict) -> dict:
    opts = cfg.get("opts", {})
    if not isinstance(opts, dict):
        raise ConfigError("'opts' must be an object")
    out = {}
    try:
        if "tol" in opts:
            out["tol"] = float(opts["tol"])
        if "max_iter" in opts:
            out["max_iter"] = int(opts["max_iter"])
        if "damping" in opts:
            out["damping"] = float(opts["damping"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad opts: {exc}") from exc
    return out


def _q_params(cfg: dict) -> dict:
    q = cfg.get("estimates", {})
    return {"N": float(q.get("N", 2.0)), "alpha": float(q.get("alpha", 1.0)), "a": float(q.get("a", 0.0))}


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    problem = Problem.from_dict(_problem_block(cfg))
    opts = _solve_opts(cfg)
    q = _q_params(cfg)
    out = Path(args.out)
    try:
        init = init_from_dict(problem, cfg.get("init"))
    except DomainError as exc:
        report = None
        init_error = f"{type(exc).__name__}: {exc}"
    else:
        report = solve(problem, init, **opts)
        init_error = None
    if report is None:
        body = {"kind": "solve", "problem": problem.to_dict(), "converged": False, "error": init_error, "iterations": 0}
        write_json(out / "solve.json", body, _meta(args, t0))
        log.error("initial graph rejected: %s", init_error)
        return EXIT_FAIL
    body = {"kind": "solve", "problem": problem.to_dict(), **report.to_dict()}
    write_json(out / "solve.json", body, _meta(args, t0, solve_wall_time=round(report.wall_time, 6)))
    _write_text(out / "iterations.csv", report.iteration_csv())
    ok = report.converged
    if report.converged:
        est = estimate_report(problem, report.final_graph, **q)
        write_json(out / "estimates.json", {"kind": "estimates", **est.to_dict()}, _meta(args, t0))
        _write_text(out / "graph.csv", graph_csv(report.final_graph))
        ok = est.passed
        log.info(
            "converged in %d iterations, residual %.3e, barrier %s",
            report.iterations,
            report.final_residual,
            "pass" if est.passed else "FAIL",
        )
    else:
        log.error("not converged: %s", report.error)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_continue(args) -> int:
    t0 = time.perf_counter()
    cfg = _load_config(args)
    problem = Problem.from_dict(_problem_block(cfg))
    if "path" not in cfg:
        raise ConfigError("continuation config needs a 'path' block")
    path = ContinuationPath.from_dict(cfg["path"])
    opts = _solve_opts(cfg)
    init = init_from_dict(path.problem_at(problem, path.values[0]), cfg["init"]) if "init" in cfg else None
    run = continuation(problem, path, init=init, **opts)
    series = monitor_continuation(run, problem)
    out = Path(args.out)
    body = {
        "kind": "continuation",
        "problem": problem.to_dict(),
        "path": path.to_dict(),
        "completed": run.completed,
        "failure": run.failure,
        "params": run.params,
        "reports": [r.to_dict() for r in run.reports],
    }
    write_json(out / "continuation.json", body, _meta(args, t0, step_wall_times=[round(r.wall_time, 6) for r in run]))
    write_json(out / "monitor.json", {"kind": "monitor", **series.to_dict()}, _meta(args, t0))
    _write_text(out / "series.csv", series.to_csv())
    ok = run.completed and not series.flagged
    log.info("%d/%d steps converged%s", len(run), len(path.values), "" if ok else "; see monitor.json")
    return EXIT_OK if ok else EXIT_FAIL


def _summarize(path: str, data: dict) -> dict:
    kind = data.get("kind", "unknown")
    row = {"file": str(path), "kind": kind, "ok": None, "detail": ""}
    if kind == "verify":
        reps = data.get("reports", [])
        row["ok"] = bool(data.get("passed"))
        row["detail"] = f"{len(reps)} reports, {sum(r.get('violation_count', 0) for r in reps)} violations"
    elif kind == "solve":
        row["ok"] = bool(data.get("converged"))
        hist = data.get("residual_history") or [None]
        row["detail"] = f"iterations={data.get('iterations')} residual={hist[-1]}"
    elif kind == "estimates":
        row["ok"] = bool(data["c0"]["passed"])
        row["detail"] = f"kappa_max={data['c2']['kappa_max']} min_u={data['c1']['min_u']}"
    elif kind == "continuation":
        row["ok"] = bool(data.get("completed"))
        row["detail"] = f"{len(data.get('reports', []))} steps"
    elif kind == "monitor":
        row["ok"] = not data.get("flagged")
        row["detail"] = f"{len(data.get('steps', []))} steps"
    elif kind == "cone_samples":
        row["ok"] = True
        row["detail"] = f"n={data.get('n')} k={data.get('k')} count={data.get('count')}"
    return row


def cmd_report(args) -> int:
    t0 = time.perf_counter()
    files = []
    for p in args.paths:
        p = Path(p)
        if p.is_dir():
            found = sorted(f for f in p.rglob("*.json") if not f.name.endswith(".meta.json") and f.name != "summary.json")
            # paths relative to the given directory keep summaries relocatable
            files.extend((f, f.relative_to(p).as_posix()) for f in found)
        elif p.exists():
            files.append((p, p.name))
        else:
            raise ConfigError(f"no such file or directory: {p}")
    rows = [_summarize(name, read_json(f)) for f, name in files]
    out = Path(args.out)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["file", "kind", "ok", "detail"])
    for r in rows:
        w.writerow([r["file"], r["kind"], "" if r["ok"] is None else str(r["ok"]).lower(), r["detail"]])
    _write_text(out / "summary.csv", buf.getvalue())
    all_ok = all(r["ok"] is not False for r in rows)
    write_json(out / "summary.json", {"kind": "summary", "all_ok": all_ok, "entries": rows}, _meta(args, t0))
    log.info("summarized %d files", len(rows))
    return EXIT_OK


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", default="curvlab_out", help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="base seed (default: %(default)s)")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $CURVLAB_THREADS or 1)")
    common.add_argument("--quiet", action="store_true", help="only print errors")

    parser = argparse.ArgumentParser(prog="curvlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"curvlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run lemma verification campaigns")
    sc = sub.add_parser("sample-cone", parents=[common], help="draw seeded samples of a Garding cone")
    sc.add_argument("-n", type=int)
    sc.add_argument("-k", type=int)
    sc.add_argument("--count", type=int)
    sc.add_argument("--scale", type=float)
    sub.add_parser("solve", parents=[common], help="solve one prescribed curvature problem")
    sub.add_parser("continue", parents=[common], help="run a continuation in p or psi amplitude")
    rp = sub.add_parser("report", parents=[common], help="summarize JSON outputs")
    rp.add_argument("paths", nargs="*", default=[], help="report files or directories")
    return parser


COMMANDS = {
    "verify": cmd_verify,
    "sample-cone": cmd_sample_cone,
    "solve": cmd_solve,
    "continue": cmd_continue,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr, force=True)
    if args.threads is not None and args.threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
