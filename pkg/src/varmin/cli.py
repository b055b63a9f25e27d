"""Command-line entry point.

Every subcommand is a thin adapter over the library: it loads the
instance, runs one pipeline stage, and emits a report. JSON reports are
byte-identical across reruns with the same inputs and seed; wall time is
shown only in text format so it never breaks that.

Exit codes: 0 success, 1 usage or input error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import branchcut, cvar, instances, lower, lpec, smoothing, upper
from . import lp as lp_mod
from .lp import NumericalFailure


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(p, instance_required=True):
    p.add_argument("--instance", required=instance_required,
                   help="instance JSON file")
    p.add_argument("--beta", type=float, default=None,
                   help="override the instance confidence level")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--seed", type=int, default=0,
                   help="seed echoed into the report; reserved for "
                        "randomized options")
    p.add_argument("--output", default=None, help="also write the report here")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for the independent LP sweeps")


def build_parser() -> _Parser:
    ap = _Parser(prog="varmin", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-paper-instance",
                       help="emit the bundled 27-scenario example instance")
    g.add_argument("--beta", type=float, default=0.9)
    g.add_argument("--out", default=None, help="write the instance here "
                   "instead of stdout")

    v = sub.add_parser("validate", help="check invariants and bound the polytope")
    _add_common(v)

    c = sub.add_parser("cvar-min", help="minimize CVaR over the polytope")
    _add_common(c)

    ve = sub.add_parser("var-eval", help="evaluate VaR/CVaR at a portfolio")
    _add_common(ve)
    ve.add_argument("--x", required=True,
                    help="comma-separated portfolio weights")

    ub = sub.add_parser("upper-bound", help="piece-improvement upper bound")
    _add_common(ub)
    ub.add_argument("--strategy", choices=("auto", "full", "pairs"),
                    default="auto")

    lb = sub.add_parser("lower-bound", help="root relaxations and cut bounds")
    _add_common(lb)
    lb.add_argument("--csv", default=None, help="write the cut sweep as CSV")
    lb.add_argument("--no-corollary", action="store_true",
                    help="skip the 6k-LP aggregate cut bound")

    vf = sub.add_parser("verify", help="certify a candidate's optimality")
    _add_common(vf)
    vf.add_argument("--candidate", default=None,
                    help="candidate JSON {m, x, [tau], [lam]}; defaults to "
                         "the improved CVaR point")
    vf.add_argument("--relax", choices=("zsub", "hull"), default="zsub")
    vf.add_argument("--tree", default=None, help="write the search tree here")
    vf.add_argument("--tree-format", choices=("dot", "text"), default="dot")

    so = sub.add_parser("solve", help="certified global minimum VaR")
    _add_common(so)
    so.add_argument("--relax", choices=("auto", "zsub", "hull"), default="auto")
    so.add_argument("--budget", type=int, default=100000,
                    help="node expansion cap")
    so.add_argument("--tree", default=None)
    so.add_argument("--tree-format", choices=("dot", "text"), default="dot")

    sm = sub.add_parser("smooth", help="smoothed local descent")
    _add_common(sm)
    sm.add_argument("--epsilon", type=float, default=1e-3)
    sm.add_argument("--kind", choices=("sqrt", "logexp"), default="sqrt")
    sm.add_argument("--start", choices=("cvar", "uniform"), default="cvar")
    sm.add_argument("--no-continuation", action="store_true",
                    help="solve at the final epsilon only")

    ex = sub.add_parser("export-tree", help="re-render a saved certificate tree")
    ex.add_argument("--report", required=True,
                    help="report JSON from verify or solve")
    ex.add_argument("--format", choices=("dot", "text"), default="dot")
    ex.add_argument("--out", default=None)
    return ap


def _load_instance(args) -> instances.Instance:
    inst = instances.load(args.instance)
    if getattr(args, "beta", None) is not None:
        inst = inst.with_beta(args.beta)
    return inst


def _report(args, command, inst, digest, results, started) -> dict:
    params = {k: v for k, v in sorted(vars(args).items())
              if k not in ("command", "format", "output") and v is not None}
    return {
        "command": command,
        "instance": None if inst is None else {
            "digest": digest,
            "n": inst.n, "k": inst.k, "beta": inst.beta,
        },
        "parameters": params,
        "results": results,
        "lp_count": lp_mod.solve_count - started,
    }


def _emit(args, report, wall) -> None:
    doc = json.dumps(report, sort_keys=True, indent=2)
    if getattr(args, "format", "json") == "text":
        lines = [f"{report['command']}:"]
        for key, val in sorted(report["results"].items()):
            lines.append(f"  {key} = {val}")
        lines.append(f"  lp_count = {report['lp_count']}")
        lines.append(f"  wall_time_sec = {wall:.3f}")
        print("\n".join(lines))
    else:
        print(doc)
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(doc + "\n")


def _parse_vector(text: str, n: int, what: str) -> np.ndarray:
    try:
        vec = np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise _UsageError(f"bad {what}: {exc}") from exc
    if vec.size != n:
        raise _UsageError(f"{what} needs {n} entries, got {vec.size}")
    return vec


def _default_candidate(inst) -> lpec.LpecPoint:
    trace = upper.improve(inst, cvar.minimize_cvar(inst).x)
    return trace.witness


def _load_candidate(inst, path) -> lpec.LpecPoint:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("m", "x"):
        if key not in doc:
            raise instances.ParseError(f"candidate file is missing {key!r}")
    tau = np.array(doc["tau"], dtype=float) if "tau" in doc else None
    lam = np.array(doc["lam"], dtype=float) if "lam" in doc else None
    return lpec.LpecPoint.build(inst, float(doc["m"]),
                                np.array(doc["x"], dtype=float), tau, lam)


def _certificate_results(cert) -> dict:
    return {"certificate": cert.to_dict()}


def _run(args) -> int:
    started = lp_mod.solve_count
    t0 = time.perf_counter()

    if args.command == "gen-paper-instance":
        inst = instances.example_instance(args.beta)
        doc = instances.dumps(inst)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(doc)
            print(json.dumps({"command": args.command, "written": args.out,
                              "digest": instances.digest(inst)},
                             sort_keys=True, indent=2))
        else:
            sys.stdout.write(doc)
        return 0

    if args.command == "export-tree":
        with open(args.report, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        cert_doc = doc.get("results", {}).get("certificate")
        if cert_doc is None:
            raise _UsageError("report carries no certificate tree")
        cert = branchcut.Certificate.from_dict(cert_doc)
        rendered = branchcut.export_tree(cert, args.format)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(rendered)
        else:
            sys.stdout.write(rendered)
        return 0

    inst = _load_instance(args)
    digest = instances.digest(inst)

    if args.command == "validate":
        report = instances.validate(inst)
        results = {
            "ok": report.ok,
            "problems": report.problems,
            "abs_bound": None if report.abs_bound is None
                else report.abs_bound.tolist(),
        }
        _emit(args, _report(args, args.command, inst, digest, results, started),
              time.perf_counter() - t0)
        return 0

    instances.validate(inst)

    if args.command == "cvar-min":
        sol = cvar.minimize_cvar(inst)
        results = {
            "cvar": sol.cvar,
            "m": sol.m,
            "var_of_x": cvar.var_of(inst, sol.x),
            "x": sol.x.tolist(),
            "tau": sol.tau.tolist(),
        }
    elif args.command == "var-eval":
        x = _parse_vector(args.x, inst.n, "--x")
        if not inst.polytope.contains(x):
            raise _UsageError("--x is not a feasible portfolio")
        lo, hi = cvar.mbeta_interval(inst, x)
        results = {
            "var": cvar.var_of(inst, x),
            "cvar": cvar.cvar_of(inst, x),
            "argmin_interval": [lo, hi],
        }
    elif args.command == "upper-bound":
        start = cvar.minimize_cvar(inst)
        trace = upper.improve(inst, start.x, strategy=args.strategy)
        results = {
            "m_ub": trace.best_value,
            "start_value": trace.start_value,
            "x_ub": trace.best_x.tolist(),
            "pieces_solved": trace.pieces_solved,
            "steps": [{
                "free_tau": sorted(p.free_tau),
                "eq_s": sorted(p.eq_s),
                "lp_value": lp_val,
                "refreshed": refreshed,
            } for p, lp_val, refreshed in trace.steps],
        }
    elif args.command == "lower-bound":
        zsub = {}
        for sign in (lower.NONNEG, lower.NONPOS):
            sol = lp_mod.solve_lp(lower.z_relax_model(inst, sign))
            zsub[sign] = sol.objective if sol.is_optimal else sol.status
        hb = lower.hull_bounds(inst)
        hull_sol = lp_mod.solve_lp(lower.hull_relax_model(inst, hb))
        results = {
            "zsub": zsub,
            "hull": hull_sol.objective if hull_sol.is_optimal else hull_sol.status,
            "objective_floor": lpec.min_var_exists_check(inst),
        }
        if not args.no_corollary:
            results["corollary"] = lower.corollary_bound(inst, threads=args.threads)
        if args.csv:
            lower.sweep_to_csv(lower.cut_sweep(inst, threads=args.threads), args.csv)
            results["csv"] = args.csv
    elif args.command == "verify":
        if args.candidate:
            cand = _load_candidate(inst, args.candidate)
        else:
            cand = _default_candidate(inst)
        cert = branchcut.verify_global(inst, cand, relax=args.relax)
        results = _certificate_results(cert)
        if args.tree:
            with open(args.tree, "w", encoding="utf-8") as fh:
                fh.write(branchcut.export_tree(cert, args.tree_format))
            results["tree"] = args.tree
    elif args.command == "solve":
        cert = branchcut.solve_global(inst, budget=args.budget, relax=args.relax)
        results = _certificate_results(cert)
        results["m_var"] = cert.m_ub
        results["gap"] = cert.gap
        if args.tree:
            with open(args.tree, "w", encoding="utf-8") as fh:
                fh.write(branchcut.export_tree(cert, args.tree_format))
            results["tree"] = args.tree
    elif args.command == "smooth":
        kind = smoothing.SmoothKind(
            smoothing.SQRT if args.kind == "sqrt" else smoothing.LOGEXP,
            args.epsilon)
        if args.start == "cvar":
            x0 = cvar.minimize_cvar(inst).x
        else:
            x0 = np.full(inst.n, 1.0 / inst.n)
        schedule = [args.epsilon] if args.no_continuation else None
        res = smoothing.smooth_minimize(inst, kind, x0, schedule=schedule)
        lo, hi = cvar.mbeta_interval(inst, res.x)
        results = {
            "m_smooth": res.m,
            "x": res.x.tolist(),
            "fw_gap": res.stationarity,
            "iterations": res.iterations,
            "epsilon": res.epsilon,
            "var_of_x": cvar.var_of(inst, res.x),
            "argmin_interval": [lo, hi],
            "argmin_is_singleton": bool(hi - lo <= 1e-9),
        }
    else:  # pragma: no cover
        raise _UsageError(f"unknown command {args.command}")

    _emit(args, _report(args, args.command, inst, digest, results, started),
          time.perf_counter() - t0)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (instances.ParseError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except (NumericalFailure, cvar.Infeasible, instances.BadProbabilities,
            instances.UnboundedPolytope, ValueError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
