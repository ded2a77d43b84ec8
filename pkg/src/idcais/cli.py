"""Command-line entry point ``idcais``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .assignment import solve_cadaa, solve_cudaa
from .safety_filter import QCQPError
from .sim.experiments import assignment_tables, compare_assignments, load_sweep_config, success_rate_sweep
from .sim.runner import run_simulation
from .sim.scenario import ScenarioError, load
from .time_optimal import NoRootError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def _emit(doc, out: str | None = None) -> None:
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    scenario = load(args.scenario)
    changes = {}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.no_cbf:
        changes["cbf_enabled"] = False
    if args.assignment:
        changes["assignment_mode"] = args.assignment
    if args.attacker_policy:
        changes["attacker_policy"] = args.attacker_policy
    if changes:
        scenario = scenario.with_options(**changes)
    log, outcome = run_simulation(scenario)
    if args.out:
        out = Path(args.out)
        log.write(out)
        _emit(outcome.to_dict(), str(out / "outcome.json"))
    _emit(outcome.to_dict())
    return EXIT_OK


def _cmd_assign(args) -> int:
    scenario = load(args.scenario)
    tables = assignment_tables(scenario)
    result = solve_cadaa(tables) if scenario.assignment_mode == "cadaa" else solve_cudaa(tables)
    _emit({"mode": scenario.assignment_mode, "assignment": result.to_dict(), "cost_tables": tables.to_dict()}, args.out)
    return EXIT_OK


def _cmd_compare(args) -> int:
    _emit(compare_assignments(load(args.scenario)).to_dict())
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_sweep_config(args.config, seed=args.seed)
    _emit(success_rate_sweep(config).to_dict(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for randomized grids (deterministic runs ignore it)")
    common.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")

    parser = argparse.ArgumentParser(prog="idcais", description="Collision-aware multi-defender interception.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run a closed-loop simulation")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--out", help="directory for trajectory.csv, trajectory_events.json and outcome.json")
    sim.add_argument("--dt", type=float)
    sim.add_argument("--no-cbf", action="store_true", help="disable the safety filter")
    sim.add_argument("--assignment", choices=("cadaa", "cudaa"))
    sim.add_argument("--attacker-policy", choices=("optimal", "evasive"))
    sim.set_defaults(func=_cmd_simulate)

    assign = sub.add_parser("assign", parents=[common], help="solve the initial assignment")
    assign.add_argument("--scenario", required=True)
    assign.add_argument("--out", required=True)
    assign.set_defaults(func=_cmd_assign)

    compare = sub.add_parser("compare", parents=[common], help="compare CADAA and CUDAA")
    compare.add_argument("--scenario", required=True)
    compare.set_defaults(func=_cmd_compare)

    sweep = sub.add_parser("sweep", parents=[common], help="success-rate sweep over a second-defender grid")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out")
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"idcais: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QCQPError, NoRootError) as exc:
        print(f"idcais: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"idcais: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RuntimeError, ArithmeticError) as exc:
        print(f"idcais: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
