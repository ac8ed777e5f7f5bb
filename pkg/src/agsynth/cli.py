"""Command line entry point.

    agsynth run --experiment 1 --grid 4 --mode both --out table.csv
    agsynth emit rows.json --format markdown --out table.md
    agsynth compile-spec "F(a) & G(!b)" --out phi1
    agsynth validate-config bundle.json

Exit codes: 0 success, 2 infeasible, 3 configuration error, 4 solver limit.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiment import compile_spec, emit_table, rows_from_json, run_bundle
from .gridworld import ConfigError, GridConfig, bundle_from_config, experiment_config, load_placements
from .ltlf import LtlfSyntaxError
from .solver import INFEASIBLE, ITERATION_LIMIT, TIME_LIMIT, SolverConfig

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_LIMIT = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="agsynth", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="synthesize and evaluate policies")
    run.add_argument("--experiment", type=int, choices=(1, 2), default=1)
    run.add_argument("--grid", type=int, nargs="+", default=[4], help="grid size(s) n")
    run.add_argument("--mode", choices=("monolithic", "ag", "both"), default="both")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--episodes", type=int, default=10_000)
    run.add_argument("--out", help="report file (format from suffix: .csv, .json, .md)")
    run.add_argument("--format", choices=("csv", "json", "markdown"))
    run.add_argument("--reward-steps", choices=("H", "Hplus1"), default="Hplus1")
    run.add_argument("--solver-tol", type=float, default=1e-8)
    run.add_argument("--time-limit", type=float)
    run.add_argument("--solver", choices=("highs", "simplex"), default="highs",
                     help="HiGHS library or the built-in dense simplex (small problems only)")
    run.add_argument("--method", choices=("auto", "simplex", "ipm", "pdlp"), default="auto",
                     help="HiGHS algorithm")
    run.add_argument("--unsound", action="store_true",
                     help="allow delta1 + delta2 > delta")
    run.add_argument("--placements", help="JSON placement override")
    run.add_argument("--config", help="JSON bundle (see validate-config)")
    for name in ("delta1", "delta2", "delta"):
        run.add_argument(f"--{name}", type=float)

    emit = sub.add_parser("emit", help="re-render saved report rows")
    emit.add_argument("rows", help="JSON rows written by `run --format json`")
    emit.add_argument("--format", choices=("csv", "json", "markdown"), default="markdown")
    emit.add_argument("--out")

    comp = sub.add_parser("compile-spec", help="compile an LTLf formula to a DFA")
    comp.add_argument("formula")
    comp.add_argument("--out", help="output stem; writes <out>.dot and <out>.json")

    val = sub.add_parser("validate-config", help="check a JSON bundle")
    val.add_argument("config")
    return ap


def _load_bundle_config(path):
    obj = json.loads(Path(path).read_text())
    return int(obj["experiment"]), GridConfig.from_json(json.dumps(obj["config"]))


def _format_for(args) -> str:
    if args.format:
        return args.format
    if args.out:
        return {".json": "json", ".md": "markdown"}.get(Path(args.out).suffix, "csv")
    return "markdown"


def _cmd_run(args) -> int:
    cfg = SolverConfig(feasibility_tol=args.solver_tol, optimality_tol=args.solver_tol,
                       time_limit=args.time_limit, backend=args.solver, method=args.method)
    deltas = (args.delta1, args.delta2, args.delta)
    risks = None
    if any(d is not None for d in deltas):
        if any(d is None for d in deltas):
            raise ConfigError("--delta1, --delta2 and --delta must be given together")
        risks = deltas
    placements = load_placements(args.placements) if args.placements else None
    bundles = []
    if args.config:
        exp, gcfg = _load_bundle_config(args.config)
        bundles.append(bundle_from_config(gcfg, exp))
    else:
        for n in args.grid:
            bundles.append(experiment_config(args.experiment, n, placements=placements,
                                             reward_steps=args.reward_steps,
                                             unsound=args.unsound, risks=risks))
    rows = []
    for b in bundles:
        rows.extend(run_bundle(b, args.mode, args.seed, args.episodes, cfg))
    text = emit_table(rows, _format_for(args), args.out)
    if not args.out:
        sys.stdout.write(text)
    statuses = {r.status for r in rows}
    if INFEASIBLE in statuses:
        return EXIT_INFEASIBLE
    if statuses & {ITERATION_LIMIT, TIME_LIMIT}:
        return EXIT_LIMIT
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "emit":
            rows = rows_from_json(Path(args.rows).read_text())
            text = emit_table(rows, args.format, args.out)
            if not args.out:
                sys.stdout.write(text)
            return EXIT_OK
        if args.command == "compile-spec":
            _, msg = compile_spec(args.formula, args.out)
            print(msg)
            return EXIT_OK
        if args.command == "validate-config":
            exp, gcfg = _load_bundle_config(args.config)
            bundle_from_config(gcfg, exp)
            print("ok")
            return EXIT_OK
    except LtlfSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, KeyError, json.JSONDecodeError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
