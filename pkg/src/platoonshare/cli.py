"""Command line entry point: ``platoonshare {scenario,run,sweep,validate}``.

Exit codes: 0 success, 1 configuration error, 2 infeasible run or an
allocation with violations.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .channel import ChannelGains
from .errors import ConfigError
from .harness import (
    DEFAULT_METHODS,
    DEFAULT_SWEEP,
    FORMAT_VERSION,
    METHODS,
    ExperimentPlan,
    emit_csv,
    emit_trace,
    method_rng,
    run_method,
    run_sweep,
)
from .linkmodel import Allocation, LinkBudgetParams, validate_allocation
from .scenario import ScenarioConfig, build_scenario, load_config

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2


def _scenario_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    if args.pv is not None:
        if args.pv % cfg.num_platoons:
            raise ConfigError(f"--pv {args.pv} does not split into {cfg.num_platoons} equal platoons")
        cfg = replace(cfg, platoon_sizes=(args.pv // cfg.num_platoons,) * cfg.num_platoons)
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    return cfg


def cmd_scenario(args) -> int:
    scenario = build_scenario(_scenario_config(args))
    sys.stdout.write(scenario.dump())
    if args.gains:
        Path(args.gains).write_text(ChannelGains.from_scenario(scenario).dump())
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _scenario_config(args)
    scenario = build_scenario(cfg)
    params = LinkBudgetParams()
    pv = cfg.total_vehicles
    out = run_method(args.method, scenario, params, method_rng(cfg.rng_seed, pv, args.method), trace=bool(args.trace))
    if args.trace:
        emit_trace(out, args.trace)
    if not out.ok:
        print(f"{args.method}: {out.status}", file=sys.stderr)
        for line in out.trace:
            print(line, file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.dump_allocation:
        Path(args.dump_allocation).write_text(json.dumps({
            "format_version": FORMAT_VERSION,
            "method": args.method,
            "scenario": cfg.to_dict(),
            "params": params.to_dict(),
            "allocation": out.allocation.to_dict(),
        }, indent=1, sort_keys=True) + "\n")
    print(f"method: {args.method}")
    print(out.report.format())
    print(f"violations: {len(out.violations)}")
    for v in out.violations:
        print(f"  {v}")
    return EXIT_OK


def _plan_from_args(args) -> ExperimentPlan:
    plan = ExperimentPlan.load(args.plan) if args.plan else ExperimentPlan()
    kw = {}
    if args.methods:
        kw["methods"] = tuple(args.methods)
    if args.sweep:
        kw["sweep"] = tuple(args.sweep)
    if args.seeds is not None:
        kw["seeds"] = tuple(range(args.seeds))
    if kw:
        plan = ExperimentPlan(
            methods=kw.get("methods", plan.methods),
            sweep=kw.get("sweep", plan.sweep),
            seeds=kw.get("seeds", plan.seeds),
            params=plan.params,
            scenario_template=plan.scenario_template,
        )
    return plan


def cmd_sweep(args) -> int:
    plan = _plan_from_args(args)
    out_dir = Path(args.out)
    if args.write_plan:
        Path(args.write_plan).write_text(json.dumps(plan.to_dict(), indent=1, sort_keys=True) + "\n")
    progress = None
    if args.verbose:
        def progress(pv, seed):
            print(f"pv={pv} seed={seed}", file=sys.stderr)
    result = run_sweep(plan, progress)
    agg, raw = emit_csv(result, out_dir / "aggregate.csv")
    failed = sum(not r.status == "ok" for r in result.rows)
    print(f"{len(result.rows)} runs ({failed} failed) -> {agg}, {raw}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        data = json.loads(Path(args.allocation).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read allocation {args.allocation}: {exc}") from exc
    if "allocation" not in data or "scenario" not in data:
        raise ConfigError("allocation dump needs 'scenario' and 'allocation' entries")
    cfg = ScenarioConfig.from_dict(data["scenario"])
    params = LinkBudgetParams(**data["params"]) if "params" in data else LinkBudgetParams()
    scenario = build_scenario(cfg)
    try:
        alloc = Allocation.from_dict(data["allocation"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed allocation: {exc}") from exc
    violations = validate_allocation(alloc, scenario, params=params)
    for v in violations:
        print(v)
    print(f"{len(violations)} violation(s)")
    return EXIT_INFEASIBLE if violations else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="platoonshare", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_flags(p):
        p.add_argument("--config", help="scenario JSON file (ScenarioConfig fields)")
        p.add_argument("--pv", type=int, help="total platoon vehicles, split evenly across platoons")
        p.add_argument("--seed", type=int, help="scenario seed")

    p = sub.add_parser("scenario", help="build a scenario and print its entities")
    scenario_flags(p)
    p.add_argument("--gains", help="also write the gain table (dB, tab separated) here")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("run", help="run one method on one scenario")
    scenario_flags(p)
    p.add_argument("--method", default="proposed", choices=sorted(METHODS))
    p.add_argument("--trace", help="write the matching trace to this file")
    p.add_argument("--dump-allocation", help="write the allocation as JSON (input for 'validate')")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run methods x platoon sizes x seeds and write CSVs")
    p.add_argument("--plan", help="plan JSON file")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--methods", nargs="+", choices=sorted(METHODS),
                   help=f"default: {' '.join(DEFAULT_METHODS)}")
    p.add_argument("--sweep", nargs="+", type=int,
                   help=f"total PV counts (default: {' '.join(map(str, DEFAULT_SWEEP))})")
    p.add_argument("--seeds", type=int, help="use seeds 0..N-1 (default 20)")
    p.add_argument("--write-plan", help="write the effective plan JSON here")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check an allocation dump against every constraint")
    p.add_argument("allocation", help="JSON written by 'run --dump-allocation'")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
