"""Command line entry point: simulate, khull, beta, batch and audit subcommands.

Exit codes: 0 ok, 1 validation error, 2 invariant violation or failed audit,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import geometry as geo
from .engine import Trace, run
from .errors import (CoLocationError, DegenerateHullError, DegenerateInstanceError,
                     IllegalMoveError, InvariantViolation, KCaptureError, NotInteriorError,
                     PreconditionError, ScenarioValidationError, TraceFormatError)
from .oracle import audit_trace
from .scenario import Scenario, generate_batch, load_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3

CSV_FIELDS = ["scenario", "policy", "evader", "n", "k", "d_max", "beta_max", "T",
              "capture_bound", "ratio", "outcome", "audit_ok", "error"]


def _err(msg: str) -> None:
    print(f"kcapture: {msg}", file=sys.stderr)


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if getattr(args, "seed", None) is not None:
        sc.seed = args.seed
    if getattr(args, "step_limit", None) is not None:
        sc.step_limit = args.step_limit
    if getattr(args, "eps_cap", None) is not None:
        sc.tolerances["eps_cap"] = args.eps_cap
    if getattr(args, "eps_closest", None) is not None:
        sc.tolerances["eps_closest"] = args.eps_closest
    return sc


def simulate_scenario(sc: Scenario) -> tuple[dict, Trace]:
    """Run and audit one scenario; returns the report and the trace."""
    outcome, trace = run(sc)
    audit = audit_trace(trace)
    trace.audit = audit.to_dict()
    report = {
        "schema_version": 1,
        "scenario": sc.name,
        "outcome": outcome.kind,
        "time": outcome.time,
        "detail": outcome.to_dict(),
        "audit": trace.audit,
        "bounds": {key: trace.header.get(key) for key in
                   ("d_max", "beta_max", "cos_beta", "capture_bound", "gather_bound",
                    "bounded_cap", "step_limit")},
    }
    return report, trace


def cmd_simulate(args) -> int:
    try:
        sc = _apply_overrides(load_scenario(args.scenario), args)
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"cannot read scenario: {exc}")
        return EXIT_IO
    except (ScenarioValidationError, TraceFormatError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    if not sc.name:
        sc.name = Path(args.scenario).stem
    try:
        report, trace = simulate_scenario(sc)
    except ScenarioValidationError as exc:
        for v in exc.violations:
            _err(v)
        return EXIT_VALIDATION
    except (InvariantViolation, CoLocationError, IllegalMoveError,
            DegenerateInstanceError) as exc:
        _err(f"invariant violation: {exc}")
        return EXIT_INVARIANT
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        trace.save(out / "trace.json")
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
        if args.svg:
            if sc.m == 2:
                from .plotting import plot_trace
                plot_trace(trace, out / "trajectory.svg")
            else:
                _err("--svg ignored: trajectory plots are planar only")
    except OSError as exc:
        _err(f"cannot write outputs: {exc}")
        return EXIT_IO
    print(json.dumps({"outcome": report["outcome"], "time": report["time"],
                      "audit_ok": report["audit"]["ok"], "out_dir": str(out)}))
    if not report["audit"]["ok"]:
        for v in report["audit"]["violations"]:
            _err(f"audit: {v}")
        return EXIT_INVARIANT
    return EXIT_OK


def _load_points(path: str) -> np.ndarray:
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("points", data.get("pursuers"))
    return geo.as_points(data)


def cmd_khull(args) -> int:
    try:
        P = _load_points(args.points)
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"cannot read points: {exc}")
        return EXIT_IO
    try:
        geo.check_helly(args.k, P.shape[0], P.shape[1])
        if args.query is not None:
            q = geo.as_vector(args.query, P.shape[1])
            res = geo.halfspace_depth(P, q)
            out = {"depth": res.depth, "exact": res.exact,
                   "in_interior": geo.in_khull_interior(P, q, args.k)}
        else:
            if P.shape[1] != 2:
                _err("polygon output needs planar points; pass --query for depth")
                return EXIT_VALIDATION
            verts = geo.khull_boundary_2d(P, args.k)
            out = {"k": args.k, "vertices": [[float(x) for x in v] for v in verts],
                   "area": geo.polygon_area(verts) if verts else 0.0}
    except DegenerateHullError as exc:
        out = {"k": args.k, "degenerate": True,
               "vertices": [[float(x) for x in v] for v in exc.vertices]}
    except (KCaptureError, ValueError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    print(json.dumps(out))
    return EXIT_OK


def cmd_beta(args) -> int:
    try:
        P = _load_points(args.points)
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"cannot read points: {exc}")
        return EXIT_IO
    try:
        q = geo.as_vector(args.query, P.shape[1])
        res = geo.beta_max(P, q, args.k)
    except NotInteriorError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except (KCaptureError, ValueError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    print(json.dumps({"beta_max": res.beta_max, "cos_beta_max": math.cos(res.beta_max),
                      "direction": [float(x) for x in res.argmin_direction],
                      "exact": res.exact}))
    return EXIT_OK


def _batch_row(payload: tuple[dict, str | None]) -> dict:
    """Run one batch entry; never raises, failures become row errors."""
    sc_dict, trace_dir = payload
    row = {f: "" for f in CSV_FIELDS}
    row["scenario"] = sc_dict.get("name", "")
    if "_error" in sc_dict:
        row.update(outcome="invalid", audit_ok=False, error=f"bad JSON: {sc_dict['_error']}")
        return row
    try:
        sc = Scenario.from_dict(sc_dict)
        row.update(policy=sc.policy, evader=sc.evader_strategy.get("kind"), n=sc.n, k=sc.k)
        report, trace = simulate_scenario(sc)
    except ScenarioValidationError as exc:
        row.update(outcome="invalid", audit_ok=False, error="; ".join(exc.violations))
        return row
    except (KCaptureError, ValueError, KeyError, TypeError) as exc:
        row.update(outcome="error", audit_ok=False, error=f"{type(exc).__name__}: {exc}")
        return row
    h = trace.header
    row.update(d_max=h.get("d_max", ""), beta_max=h.get("beta_max", ""), T=report["time"],
               outcome=report["outcome"], audit_ok=report["audit"]["ok"],
               error="; ".join(report["audit"]["violations"]))
    bound = h.get("capture_bound") if h.get("beta_max") is not None else h.get("bounded_cap")
    if bound:
        row["capture_bound"] = bound
        row["ratio"] = report["time"] / bound
    if trace_dir:
        trace.save(Path(trace_dir) / f"{sc.name or 'scenario'}.trace.json")
    return row


def _collect_scenarios(source: str) -> list[dict]:
    p = Path(source)
    if p.is_dir():
        out = []
        for f in sorted(p.glob("*.json")):
            try:
                d = json.loads(f.read_text())
            except json.JSONDecodeError as exc:
                d = {"name": f.stem, "_error": str(exc)}
            d.setdefault("name", f.stem)
            if not d["name"]:
                d["name"] = f.stem
            out.append(d)
        return out
    spec = json.loads(p.read_text())
    return [sc.to_dict() for sc in generate_batch(spec)]


def summarize(rows: list[dict]) -> dict:
    """Pass/fail counts per check over a batch."""
    done = [r for r in rows if r["outcome"] not in ("invalid", "error")]
    return {
        "runs": len(rows),
        "failed_runs": sum(1 for r in rows if r["audit_ok"] is not True),
        "k_captured": sum(1 for r in done if r["outcome"] == "k_captured"),
        "escaped": sum(1 for r in done if r["outcome"] == "escaped"),
        "within_bound": sum(1 for r in done
                            if r["outcome"] == "k_captured" and r["ratio"] != ""
                            and r["ratio"] <= 1.0),
        "max_ratio": max((r["ratio"] for r in done if r["ratio"] != ""), default=None),
    }


def cmd_batch(args) -> int:
    try:
        entries = _collect_scenarios(args.source)
    except (OSError, json.JSONDecodeError) as exc:
        _err(f"cannot read batch source: {exc}")
        return EXIT_IO
    out = Path(args.out_dir)
    trace_dir = None
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.traces:
            trace_dir = out / "traces"
            trace_dir.mkdir(exist_ok=True)
    except OSError as exc:
        _err(f"cannot create output directory: {exc}")
        return EXIT_IO
    for d in entries:
        if args.step_limit is not None:
            d["step_limit"] = args.step_limit
        if args.seed is not None:
            d["seed"] = args.seed
        tol = d.setdefault("tolerances", {})
        if args.eps_cap is not None:
            tol["eps_cap"] = args.eps_cap
        if args.eps_closest is not None:
            tol["eps_closest"] = args.eps_closest
    payloads = [(d, str(trace_dir) if trace_dir else None) for d in entries]
    if args.workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_batch_row, payloads))
    else:
        rows = [_batch_row(p) for p in payloads]
    summary = summarize(rows)
    try:
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
            w.writeheader()
            w.writerows(rows)
        (out / "batch_report.json").write_text(
            json.dumps({"schema_version": 1, "summary": summary, "rows": rows}, indent=2) + "\n")
        if args.svg and rows:
            from .plotting import plot_batch_ratios
            plot_batch_ratios(rows, out / "ratios.svg")
    except OSError as exc:
        _err(f"cannot write outputs: {exc}")
        return EXIT_IO
    print(json.dumps(summary))
    return EXIT_OK if summary["failed_runs"] == 0 else EXIT_INVARIANT


def cmd_audit(args) -> int:
    try:
        trace = Trace.load(args.trace)
    except OSError as exc:
        _err(f"cannot read trace: {exc}")
        return EXIT_IO
    except TraceFormatError as exc:
        _err(f"malformed trace: {exc}")
        return EXIT_VALIDATION
    try:
        audit = audit_trace(trace)
    except (TraceFormatError, KeyError, ValueError, PreconditionError) as exc:
        _err(f"malformed trace: {exc}")
        return EXIT_VALIDATION
    print(json.dumps(audit.to_dict(), indent=2))
    return EXIT_OK if audit.ok else EXIT_INVARIANT


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--step-limit", type=int, default=None, help="override the step limit")
    p.add_argument("--out-dir", default="kcapture_out", help="where to write outputs")
    p.add_argument("--svg", action="store_true", help="also write an SVG figure")
    p.add_argument("--eps-cap", type=float, default=None, help="capture distance tolerance")
    p.add_argument("--eps-closest", type=float, default=None,
                   help="tolerance for counting a pursuer as closest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kcapture",
                                     description="k-capture pursuit-evasion simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario file")
    p.add_argument("scenario", help="scenario JSON file")
    _add_run_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("khull", help="depth of a query point, or the planar k-Hull polygon")
    p.add_argument("points", help="JSON file with a list of points")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--query", type=float, nargs="+", default=None)
    p.set_defaults(func=cmd_khull)

    p = sub.add_parser("beta", help="cone half angle beta_max at a query point")
    p.add_argument("points", help="JSON file with a list of points")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--query", type=float, nargs="+", required=True)
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("batch", help="run a directory of scenarios or a generator spec")
    p.add_argument("source", help="directory of scenario JSON files, or generator spec JSON")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--traces", action="store_true", help="write every trace")
    _add_run_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("audit", help="check a trace against the capture bounds")
    p.add_argument("trace", help="trace JSON file")
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
