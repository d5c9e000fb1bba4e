"""Command-line interface.

Subcommands:
  evaluate   score a layout file against a scenario, exporting maps and figures
  baseline   emit the uniform-reference report (scores are 1 by construction)
  optimize   run one method for a number of seeded repeats
  sweep      run methods across a parameter axis, deterministic outputs
  export     rebuild aggregate tables and convergence plots from trace CSVs
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import Scenario, ScenarioConfig, load_scenario_config, save_scenario_config
from .harness import (DEFAULT_SWEEPS, ExperimentPlan, RunRecord, aggregate,
                      export_plots, export_report, load_records, run_plan)
from .heuristics import HeuristicConfig
from .llm_parsing import parse_solution
from .objective import Evaluator

log = logging.getLogger(__name__)


def _load_scenario(path: str | None) -> ScenarioConfig:
    return load_scenario_config(path) if path else ScenarioConfig()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="scenario JSON/TOML file (defaults builtin)")
    p.add_argument("--out", default="luxlink_out", help="output directory")


def cmd_evaluate(args) -> int:
    scenario = Scenario(_load_scenario(args.scenario))
    layout_doc = Path(args.layout).read_text()
    layout = parse_solution(layout_doc, scenario)
    report = Evaluator(scenario, los_mode=args.mode).evaluate(layout)
    doc = export_report(report, scenario, args.out)
    print(json.dumps({k: doc[k] for k in ("phi_w", "phi_d", "phi_o", "feasible")},
                     indent=2, sort_keys=True))
    return 0


def cmd_baseline(args) -> int:
    scenario = Scenario(_load_scenario(args.scenario))
    report = Evaluator(scenario).evaluate(scenario.udw)
    doc = export_report(report, scenario, args.out)
    print(json.dumps({k: doc[k] for k in ("phi_w", "phi_d", "phi_o", "feasible")},
                     indent=2, sort_keys=True))
    return 0


def _plan_from_args(args, methods, sweep_axis=None, sweep_values=()) -> ExperimentPlan:
    heuristic = HeuristicConfig(generations=args.generations)
    return ExperimentPlan(
        scenario=_load_scenario(args.scenario),
        methods=tuple(methods),
        repeats=args.repeats,
        base_seed=args.seed,
        sweep_axis=sweep_axis,
        sweep_values=tuple(sweep_values),
        out_dir=args.out,
        workers=args.workers,
        stub_script=args.stub,
        rc_budget=args.rc_budget,
        heuristic=heuristic,
        lhs_chunk=args.lhs_chunk,
        lhs_updates=args.lhs_updates,
        deterministic_timing=not args.wall_clock,
    )


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--generations", type=int, default=1500)
    p.add_argument("--rc-budget", type=int, default=2000, dest="rc_budget")
    p.add_argument("--lhs-chunk", type=int, default=100, dest="lhs_chunk")
    p.add_argument("--lhs-updates", type=int, default=10, dest="lhs_updates")
    p.add_argument("--stub", help="scripted stub JSON for loop methods "
                                  "(default: builtin deterministic client)")
    p.add_argument("--wall-clock", action="store_true",
                   help="record real timings (breaks byte-reproducibility)")


def cmd_optimize(args) -> int:
    plan = _plan_from_args(args, [args.method])
    records = run_plan(plan)
    rows = aggregate(records, plan.out_dir)
    export_plots(records, plan.out_dir)
    for row in rows:
        print(f"{row['method']}: mean={row['mean']:.4f} std={row['std']:.4f} "
              f"n={row['n']}")
    failures = [r for r in records if r.error]
    for r in failures:
        print(f"failed: {r.run_dir}: {r.error}", file=sys.stderr)
    return 1 if failures and not rows else 0


def cmd_sweep(args) -> int:
    values = ([float(v) for v in args.values.split(",")] if args.values
              else DEFAULT_SWEEPS[args.axis])
    plan = _plan_from_args(args, args.methods.split(","), args.axis, values)
    records = run_plan(plan)
    rows = aggregate(records, plan.out_dir)
    export_plots(records, plan.out_dir)
    print(Path(plan.out_dir, "aggregate.txt").read_text(), end="")
    failures = [r for r in records if r.error]
    for r in failures:
        print(f"failed: {r.run_dir}: {r.error}", file=sys.stderr)
    return 1 if failures and not rows else 0


def cmd_export(args) -> int:
    records = load_records(args.runs)
    aggregate(records, args.out)
    written = export_plots(records, args.out)
    print(f"wrote aggregate.csv, aggregate.txt and {len(written)} plot(s) "
          f"to {args.out}")
    return 0


def cmd_init_scenario(args) -> int:
    save_scenario_config(ScenarioConfig(), args.path)
    print(f"wrote default scenario to {args.path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="luxlink",
        description="joint wireless/daylight window placement simulator and optimizer")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a layout file")
    _add_common(p)
    p.add_argument("--layout", required=True, help="layout JSON file")
    p.add_argument("--mode", choices=["analytic", "monte-carlo"],
                   default="analytic")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("baseline", help="emit the uniform-reference report")
    _add_common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("optimize", help="run one optimizer")
    _add_common(p)
    p.add_argument("--method", required=True,
                   choices=["rc", "ga", "saga", "lmwo", "lhs"])
    _add_run_options(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="run methods across a parameter axis")
    _add_common(p)
    p.add_argument("--axis", required=True, choices=["eta", "windows", "ris_units"])
    p.add_argument("--values", help="comma-separated values (default per axis)")
    p.add_argument("--methods", default="lmwo", help="comma-separated methods")
    _add_run_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="aggregate traces and regenerate plots")
    p.add_argument("--runs", required=True, help="output tree of a previous run")
    p.add_argument("--out", default="luxlink_out")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("init-scenario", help="write the default scenario file")
    p.add_argument("path")
    p.set_defaults(func=cmd_init_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
