"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 infeasible, invalid or
inconsistent, 3 budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import ALGORITHMS, RunConfig, highway_suite, mapf_perr_suite, run_solver, run_suite
from .formats import (
    ParseError,
    parse_highway,
    parse_map,
    parse_scenario,
    serialize_highway,
    serialize_map,
    serialize_scenario,
    solution_from_json,
    solution_to_json,
)
from .generate import generate_instance
from .highways import HighwayParams, generate_highways
from .model import BudgetExhausted, Flavor, InstanceError, metrics
from .stn import (
    DelayModel,
    InconsistentNetwork,
    Kinematics,
    build_stn,
    compute_schedule,
    schedule_to_json,
    simulate_execution,
    trace_to_json,
)
from .validate import validate

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3
CONFIG_HEADER = "mapfgen-config v1"


class UsageError(Exception):
    pass


class InvalidSolution(Exception):
    pass


def read_config(text: str) -> dict[str, str]:
    """``key = value`` lines after a versioned header; ``#`` starts a comment."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != CONFIG_HEADER:
        raise UsageError(f"config must start with {CONFIG_HEADER!r}")
    out = {}
    for ln in lines[1:]:
        key, sep, value = ln.partition("=")
        if not sep:
            raise UsageError(f"config line without '=': {ln!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _typed(sub: argparse.ArgumentParser, raw: dict[str, str]) -> dict:
    actions = {a.dest: a for a in sub._actions}
    out = {}
    for key, value in raw.items():
        action = actions.get(key)
        if action is None or key in ("map", "scenario", "config", "help"):
            raise UsageError(f"unknown config key {key!r}")
        out[key] = action.type(value) if action.type else value
        if action.choices and out[key] not in action.choices:
            raise UsageError(f"config {key} must be one of {sorted(action.choices)}")
    return out


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load(args):
    ws = parse_map(Path(args.map).read_text())
    inst = parse_scenario(Path(args.scenario).read_text(), ws)
    return ws, inst


def _kinematics(args) -> Kinematics:
    return Kinematics(args.v_max, args.rot_time, args.safety)


def cmd_solve(args) -> int:
    if args.highway and args.w1 is None:
        raise UsageError("--highway needs --w1")
    ws, inst = _load(args)
    hw = parse_highway(Path(args.highway).read_text(), ws) if args.highway else None
    try:
        cfg = RunConfig(args.alg, args.w, args.w1, args.w2, hw, args.budget_nodes, args.budget_seconds, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    stats: dict = {}
    try:
        sol = run_solver(inst, cfg, stats)
    except BudgetExhausted:
        print(json.dumps({"status": "budget", "stats": _plain(stats)}))
        return EXIT_BUDGET
    if sol is None:
        print(json.dumps({"status": "infeasible"}))
        return EXIT_INFEASIBLE
    text = solution_to_json(sol, inst)
    if args.out:
        Path(args.out).write_text(text)
        print(json.dumps({"status": "solved", **metrics(sol), "stats": _plain(stats)}))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _plain(stats: dict) -> dict:
    return {k: v for k, v in stats.items() if isinstance(v, (int, float, str)) or v is None}


def cmd_validate(args) -> int:
    ws, inst = _load(args)
    sol = solution_from_json(Path(args.solution).read_text(), inst)
    rep = validate(inst, sol)
    for line in rep.lines():
        print(line)
    if rep.ok:
        print(json.dumps({"status": "valid", **metrics(sol)}))
        return EXIT_OK
    return EXIT_INFEASIBLE


def cmd_gen_instance(args) -> int:
    flavor = Flavor(args.flavor.upper())
    sizes = [int(s) for s in args.sizes.split(",")]
    if not 0 <= args.blocked < 100:
        raise UsageError("--blocked is a percentage in [0, 100)")
    inst = generate_instance(args.width, args.height, args.blocked / 100.0, flavor, sizes, args.seed)
    prefix = args.out or "instance"
    Path(prefix + ".map").write_text(serialize_map(inst.workspace))
    Path(prefix + ".scen").write_text(serialize_scenario(inst))
    print(json.dumps({"map": prefix + ".map", "scenario": prefix + ".scen", "movers": inst.n}))
    return EXIT_OK


def cmd_gen_highway(args) -> int:
    ws = parse_map(Path(args.map).read_text())
    inst = parse_scenario(Path(args.scenario).read_text(), ws) if args.scenario else None
    params = HighwayParams(args.ratio, args.corridor_degree, args.penalty, args.samples, args.seed, args.rounds)
    if inst is None and not params.samples:
        raise UsageError("gen-highway needs a scenario or --samples")
    hw = generate_highways(ws, inst, params)
    _emit(serialize_highway(hw, ws), args.out)
    return EXIT_OK


def _schedule(args):
    ws, inst = _load(args)
    sol = solution_from_json(Path(args.solution).read_text(), inst)
    if not validate(inst, sol).ok:
        raise InvalidSolution("solution does not validate")
    kin = _kinematics(args)
    deadline = None
    if args.deadline == "auto":
        deadline = 2 * compute_schedule(build_stn(sol, ws, kin)).makespan()
    elif args.deadline != "none":
        deadline = float(args.deadline)
    stn = build_stn(sol, ws, kin, deadline)
    return ws, stn, compute_schedule(stn)


def cmd_post(args) -> int:
    try:
        ws, stn, sched = _schedule(args)
    except InconsistentNetwork as exc:
        print(json.dumps({"status": "inconsistent", "cycle": exc.cycle}))
        return EXIT_INFEASIBLE
    except InvalidSolution:
        print(json.dumps({"status": "invalid"}))
        return EXIT_INFEASIBLE
    _emit(schedule_to_json(sched, stn, ws), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        ws, stn, sched = _schedule(args)
    except InconsistentNetwork as exc:
        print(json.dumps({"status": "inconsistent", "cycle": exc.cycle}))
        return EXIT_INFEASIBLE
    except InvalidSolution:
        print(json.dumps({"status": "invalid"}))
        return EXIT_INFEASIBLE
    model = DelayModel(args.delay_kind, args.delay_scale, args.delay_cap, args.seed)
    trace = simulate_execution(sched, stn, model)
    _emit(trace_to_json(trace), args.out)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    if args.suite == "mapf-perr":
        cells, pairs = mapf_perr_suite(args.count, args.seed, args.width, args.height, args.movers,
                                       args.blocked / 100.0, args.budget_nodes)
    else:
        cells, pairs = highway_suite(range(args.seed, args.seed + args.count), args.movers, args.w1 or 1.5,
                                     args.w2 or 1.1, args.budget_nodes)
    report = run_suite(cells, pairs)
    prefix = args.out or "benchmark"
    Path(prefix + ".csv").write_text(report.to_csv())
    Path(prefix + ".json").write_text(report.to_json())
    print(json.dumps({"rows": len(report.rows), "comparisons": report.comparisons()}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--budget-nodes", type=int, default=20_000)
    common.add_argument("--budget-seconds", type=float, default=None)
    common.add_argument("--out", default=None, help="output file (or prefix for multi-file outputs)")

    kin = argparse.ArgumentParser(add_help=False)
    kin.add_argument("--v-max", type=float, default=1.0, help="m/s")
    kin.add_argument("--rot-time", type=float, default=0.0, help="s per 90 degree turn")
    kin.add_argument("--safety", type=float, default=0.0, help="safety distance in m")
    kin.add_argument("--deadline", default="auto", help="seconds, 'auto' (twice the earliest makespan) or 'none'")

    files = argparse.ArgumentParser(add_help=False)
    files.add_argument("map")
    files.add_argument("scenario")

    p = argparse.ArgumentParser(prog="mapfgen", description="Multi-agent path finding solvers and tools.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common, files], help="solve an instance")
    p.solve_parser = s
    s.add_argument("--alg", choices=ALGORITHMS, default="cbs")
    s.add_argument("--w", type=float, default=1.0, help="focal factor")
    s.add_argument("--w1", type=float, default=None, help="highway inflation")
    s.add_argument("--w2", type=float, default=None, help="focal factor with highways (defaults to --w)")
    s.add_argument("--highway", default=None)
    s.add_argument("--config", default=None, help=f"key = value file starting with '{CONFIG_HEADER}'")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("validate", parents=[common, files], help="validate a solution file")
    s.add_argument("solution")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("gen-instance", parents=[common], help="generate a random map and scenario")
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--blocked", type=float, default=0.0, help="percent of blocked cells")
    s.add_argument("--flavor", choices=[f.value.lower() for f in Flavor], default="mapf")
    s.add_argument("--sizes", default="2", help="mover count, or comma-separated team/type sizes")
    s.set_defaults(func=cmd_gen_instance)

    s = sub.add_parser("gen-highway", parents=[common], help="generate a highway from traffic")
    s.add_argument("map")
    s.add_argument("scenario", nargs="?")
    s.add_argument("--ratio", type=float, default=0.7)
    s.add_argument("--corridor-degree", type=int, default=3)
    s.add_argument("--penalty", type=float, default=2.0)
    s.add_argument("--samples", type=int, default=0)
    s.add_argument("--rounds", type=int, default=3)
    s.set_defaults(func=cmd_gen_highway)

    s = sub.add_parser("post", parents=[common, kin, files], help="build an execution schedule")
    s.add_argument("solution")
    s.set_defaults(func=cmd_post)

    s = sub.add_parser("simulate", parents=[common, kin, files], help="simulate delayed execution")
    s.add_argument("solution")
    s.add_argument("--delay-kind", choices=["none", "uniform", "exponential"], default="none")
    s.add_argument("--delay-scale", type=float, default=0.0)
    s.add_argument("--delay-cap", choices=["none", "slack"], default="none")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("benchmark", parents=[common], help="run a benchmark suite")
    s.add_argument("--suite", choices=["mapf-perr", "highway"], default="mapf-perr")
    s.add_argument("--count", type=int, default=10)
    s.add_argument("--width", type=int, default=5)
    s.add_argument("--height", type=int, default=5)
    s.add_argument("--movers", type=int, default=8)
    s.add_argument("--blocked", type=float, default=10.0, help="percent")
    s.add_argument("--w1", type=float, default=None)
    s.add_argument("--w2", type=float, default=None)
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if getattr(args, "config", None):
            # config values become defaults, so explicit flags still win
            parser.solve_parser.set_defaults(**_typed(parser.solve_parser, read_config(Path(args.config).read_text())))
            args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ParseError, InstanceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
