"""Experiment runners: assignment comparison, witness search and the success-rate sweep."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from ..assignment import Assignment, CostTables, build_cost_tables, objective, solve_cadaa, solve_cudaa
from ..dynamics import WorldParams
from .runner import run_simulation
from .scenario import (
    DEFAULT_ATTACKER_BOUND,
    DEFAULT_DEFENDER_BOUND,
    DEFAULT_DRAG,
    Scenario,
    ScenarioError,
    _check_keys,
    _number,
    _vector,
    make_scenario,
)

THREADS_ENV = "IDCAIS_THREADS"

# Witness-search sampling distribution (positions about r_p, speeds below caps).
ATTACKER_ANNULUS = (10.0, 20.0)
DEFENDER_ANNULUS = (3.0, 10.0)


def worker_count(requested: int | None = None) -> int:
    """Parallelism for runners: ``requested`` or the CPU count, capped by ``IDCAIS_THREADS``."""
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def parallel_map(func: Callable, items: Sequence, workers: int | None = None) -> list:
    """Order-preserving map over independent items, in worker processes when allowed."""
    n = min(worker_count(workers), len(items))
    if n <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * n))))


def assignment_tables(scenario: Scenario) -> CostTables:
    return build_cost_tables(
        [x for x, _ in scenario.defenders],
        [x for x, _ in scenario.attackers],
        scenario.world,
        [p for _, p in scenario.defenders],
        [p for _, p in scenario.attackers],
        weight=scenario.weight,
    )


def forecast_collision_time(tables: CostTables, attacker_of: Sequence[int | None]) -> float | None:
    """Earliest forecast collision among the defender pairs of an assignment."""
    assert tables.forecast is not None
    pairs = [(j, i) for j, i in enumerate(attacker_of) if i is not None]
    best = None
    for a, (j, i) in enumerate(pairs):
        for j2, i2 in pairs[a + 1:]:
            t = tables.forecast.get(j, i, j2, i2)
            if t is not None and (best is None or t < best):
                best = t
    return best


@dataclass
class ModeReport:
    mode: str
    attacker_of: tuple[int | None, ...]
    objective: float
    forecast_collision_time: float | None
    min_defender_separation: float
    first_collision_time: float | None
    interception_times: dict[int, float]
    captures: int
    breaches: int

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "attacker_of": list(self.attacker_of),
            "objective": self.objective,
            "forecast_collision_time": self.forecast_collision_time,
            "min_defender_separation": self.min_defender_separation,
            "first_collision_time": self.first_collision_time,
            "interception_times": {str(i): t for i, t in sorted(self.interception_times.items())},
            "captures": self.captures,
            "breaches": self.breaches,
        }


@dataclass
class ComparisonReport:
    cadaa: ModeReport
    cudaa: ModeReport

    @property
    def same_assignment(self) -> bool:
        return self.cadaa.attacker_of == self.cudaa.attacker_of

    def to_dict(self) -> dict:
        return {"same_assignment": self.same_assignment, "cadaa": self.cadaa.to_dict(), "cudaa": self.cudaa.to_dict()}


def _mode_report(scenario: Scenario, tables: CostTables, mode: str, result: Assignment, simulate: bool) -> ModeReport:
    value = float(objective(tables, result.attacker_of))
    t_col = forecast_collision_time(tables, result.attacker_of)
    if not simulate:
        return ModeReport(mode, result.attacker_of, value, t_col, math.nan, None, {}, 0, 0)
    run = scenario.with_options(assignment_mode=mode, cbf_enabled=False)
    _, out = run_simulation(run, assignment=result)
    return ModeReport(
        mode, result.attacker_of, value, t_col, out.min_defender_separation,
        out.first_collision_time, out.interception_times, out.captures, out.breaches,
    )


def compare_assignments(scenario: Scenario, *, tables: CostTables | None = None, simulate: bool = True) -> ComparisonReport:
    """Run the same initial conditions under CADAA and CUDAA with the filter off.

    Both objectives are evaluated with the scenario's weight.
    """
    tables = tables or assignment_tables(scenario)
    return ComparisonReport(
        _mode_report(scenario, tables, "cadaa", solve_cadaa(tables), simulate),
        _mode_report(scenario, tables, "cudaa", solve_cudaa(tables), simulate),
    )


# ---------------------------------------------------------------- witness search

def _annulus_point(rng: np.random.Generator, lo: float, hi: float, center) -> np.ndarray:
    angle = rng.uniform(0.0, 2.0 * math.pi)
    radius = math.sqrt(rng.uniform(lo * lo, hi * hi))
    return np.asarray(center, dtype=float) + radius * np.array([math.cos(angle), math.sin(angle)])


def _velocity_below(rng: np.random.Generator, cap: float) -> np.ndarray:
    angle = rng.uniform(0.0, 2.0 * math.pi)
    speed = rng.uniform(0.0, cap)
    return speed * np.array([math.cos(angle), math.sin(angle)])


def sample_scenario(
    rng: np.random.Generator,
    n_attackers: int = 2,
    n_defenders: int = 2,
    *,
    world: WorldParams | None = None,
    attacker_annulus: tuple[float, float] = ATTACKER_ANNULUS,
    defender_annulus: tuple[float, float] = DEFENDER_ANNULUS,
    max_tries: int = 1000,
    **options,
) -> Scenario:
    """Random scenario: positions uniform (by area) in annuli about r_p, speeds uniform below the caps.

    Draws that violate a scenario invariant are redrawn.
    """
    world = world or WorldParams()
    v_a = DEFAULT_ATTACKER_BOUND / DEFAULT_DRAG
    v_d = DEFAULT_DEFENDER_BOUND / DEFAULT_DRAG
    for _ in range(max_tries):
        attackers = [
            (_annulus_point(rng, *attacker_annulus, world.protected_center), _velocity_below(rng, v_a))
            for _ in range(n_attackers)
        ]
        defenders = [
            (_annulus_point(rng, *defender_annulus, world.protected_center), _velocity_below(rng, v_d))
            for _ in range(n_defenders)
        ]
        try:
            return make_scenario(attackers, defenders, world=world, **options)
        except ScenarioError:
            continue
    raise RuntimeError("could not draw a valid scenario")


@dataclass
class WitnessResult:
    samples: int
    scenario1: Scenario | None = None  # CUDAA collides, CADAA keeps separation
    scenario1_report: ComparisonReport | None = None
    scenario2: Scenario | None = None  # both collide, CADAA later
    scenario2_report: ComparisonReport | None = None
    differing: int = 0

    @property
    def found_all(self) -> bool:
        return self.scenario1 is not None and self.scenario2 is not None


def is_scenario1(report: ComparisonReport, collision_radius: float) -> bool:
    return (
        report.cudaa.min_defender_separation < collision_radius
        and report.cadaa.min_defender_separation >= collision_radius
    )


def is_scenario2(report: ComparisonReport) -> bool:
    a, b = report.cadaa.forecast_collision_time, report.cudaa.forecast_collision_time
    return a is not None and b is not None and a > b


def find_witnesses(max_samples: int = 10_000, seed: int = 0, **sample_options) -> WitnessResult:
    """Sample 2v2 scenarios until both witness types appear.

    Type 1: CUDAA's defenders collide while CADAA's keep their separation.
    Type 2: both forecast a collision, CADAA's strictly later.

    Only samples whose CADAA and CUDAA assignments differ can be witnesses;
    those are confirmed by closed-loop simulation with the filter off.
    """
    rng = np.random.default_rng(seed)
    result = WitnessResult(samples=0)
    for k in range(max_samples):
        result.samples = k + 1
        scenario = sample_scenario(rng, **sample_options)
        tables = assignment_tables(scenario)
        quick = compare_assignments(scenario, tables=tables, simulate=False)
        if quick.same_assignment:
            continue
        result.differing += 1
        t_ca, t_cu = quick.cadaa.forecast_collision_time, quick.cudaa.forecast_collision_time
        want1 = result.scenario1 is None and t_cu is not None and t_ca is None
        want2 = result.scenario2 is None and is_scenario2(quick)
        if not (want1 or want2):
            continue
        report = compare_assignments(scenario, tables=tables)
        if want1 and is_scenario1(report, scenario.world.collision_radius):
            result.scenario1, result.scenario1_report = scenario, report
        if want2 and is_scenario2(report):
            result.scenario2, result.scenario2_report = scenario, report
        if result.found_all:
            break
    return result


# ---------------------------------------------------------------- success-rate sweep

CONFLICT_FREE = "conflict_free"
AVOIDED = "avoided"
NOT_AVOIDED = "not_avoided"
INVALID = "invalid"


@dataclass
class SweepConfig:
    """Two attackers and one defender fixed; the second defender varies over ``cells``."""

    attackers: list[tuple[np.ndarray, np.ndarray]]
    defender: tuple[np.ndarray, np.ndarray]
    cells: list[tuple[np.ndarray, np.ndarray]]
    shape: tuple[int, ...]
    world: WorldParams = field(default_factory=WorldParams)
    weight: float = 0.5


@dataclass
class SweepResult:
    sigma: float | None
    numerator: int
    denominator: int
    outcomes: list[str]
    shape: tuple[int, ...]
    counts: dict[str, int]

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.outcomes, dtype=object).reshape(self.shape)

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "counts": self.counts,
            "shape": list(self.shape),
            "outcomes": self.matrix.tolist(),
        }


def _state_pair(doc: Any, where: str) -> tuple[np.ndarray, np.ndarray]:
    _check_keys(doc, {"position", "velocity"}, {"position"}, where)
    return _vector(doc, "position", where), _vector(doc, "velocity", where, [0.0, 0.0])


def sweep_config_from_dict(doc: Any, seed: int | None = None) -> SweepConfig:
    """Parse a sweep document.

    The grid is one of ``{"cells": [...]}`` (explicit states),
    ``{"x": [lo, hi, n], "y": [lo, hi, n], "velocities": [[vx, vy], ...]}``
    (regular, shape ``(len(velocities), ny, nx)``) or
    ``{"random": {"count": n, "annulus": [lo, hi], "seed": s}}`` (positions
    uniform in the annulus about r_p, speeds uniform below the cap).
    ``seed`` overrides the random grid's seed.
    """
    _check_keys(doc, {"world", "attackers", "defender", "grid", "weight"}, {"attackers", "defender", "grid"}, "$")
    world_doc = doc.get("world", {})
    _check_keys(world_doc, {"protected_center", "protected_radius", "capture_radius", "collision_radius"}, set(), "$.world")
    world = WorldParams(
        _vector(world_doc, "protected_center", "$.world", [0.0, 0.0]),
        _number(world_doc, "protected_radius", "$.world", 2.0),
        _number(world_doc, "capture_radius", "$.world", 1.0),
        _number(world_doc, "collision_radius", "$.world", 2.0),
    )
    if not isinstance(doc["attackers"], list) or len(doc["attackers"]) != 2:
        raise ScenarioError("$.attackers", "the sweep needs exactly two attackers")
    attackers = [_state_pair(a, f"$.attackers[{k}]") for k, a in enumerate(doc["attackers"])]
    defender = _state_pair(doc["defender"], "$.defender")
    grid = doc["grid"]
    if not isinstance(grid, dict) or len(grid) != 1 and set(grid) != {"x", "y", "velocities"}:
        raise ScenarioError("$.grid", "expected one of 'cells', 'random' or 'x'/'y'/'velocities'")
    if "cells" in grid:
        cells = [_state_pair(c, f"$.grid.cells[{k}]") for k, c in enumerate(grid["cells"])]
        shape: tuple[int, ...] = (len(cells),)
    elif "random" in grid:
        spec = grid["random"]
        _check_keys(spec, {"count", "annulus", "seed"}, {"count"}, "$.grid.random")
        count = spec["count"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 1:
            raise ScenarioError("$.grid.random.count", f"expected a positive integer, got {count!r}")
        lo, hi = _vector(spec, "annulus", "$.grid.random", list(DEFENDER_ANNULUS))
        rng = np.random.default_rng(seed if seed is not None else spec.get("seed", 0))
        cap = DEFAULT_DEFENDER_BOUND / DEFAULT_DRAG
        cells = [(_annulus_point(rng, lo, hi, world.protected_center), _velocity_below(rng, cap)) for _ in range(count)]
        shape = (count,)
    elif set(grid) == {"x", "y", "velocities"}:
        axes = []
        for key in ("x", "y"):
            spec = grid[key]
            if not (isinstance(spec, list) and len(spec) == 3 and isinstance(spec[2], int) and spec[2] >= 1):
                raise ScenarioError(f"$.grid.{key}", "expected [lo, hi, count]")
            axes.append(np.linspace(float(spec[0]), float(spec[1]), spec[2]))
        vels = [_vector({"v": v}, "v", f"$.grid.velocities[{k}]") for k, v in enumerate(grid["velocities"])]
        cells = [(np.array([x, y]), v) for v in vels for y in axes[1] for x in axes[0]]
        shape = (len(vels), len(axes[1]), len(axes[0]))
    else:
        raise ScenarioError(f"$.grid.{next(iter(grid))}", "unknown grid kind")
    return SweepConfig(attackers, defender, cells, shape, world, _number(doc, "weight", "$", 0.5))


def load_sweep_config(path: str | Path, seed: int | None = None) -> SweepConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", f"malformed JSON: {exc.msg}") from None
    return sweep_config_from_dict(doc, seed)


def _cell_outcome(args) -> str:
    attackers, defender, cell, world, weight = args
    try:
        scenario = make_scenario(attackers, [defender, cell], world=world, weight=weight, cbf_enabled=False)
    except ScenarioError:
        return INVALID
    tables = assignment_tables(scenario)
    if forecast_collision_time(tables, solve_cudaa(tables).attacker_of) is None:
        return CONFLICT_FREE
    if forecast_collision_time(tables, solve_cadaa(tables).attacker_of) is None:
        return AVOIDED
    return NOT_AVOIDED


def success_rate_sweep(config: SweepConfig, *, workers: int | None = None) -> SweepResult:
    """Share of CUDAA-colliding cells in which CADAA's assignment forecasts no collision.

    ``sigma`` is ``None`` when no cell collides under CUDAA. Cells whose
    varied defender violates a scenario invariant are marked invalid and
    excluded from both counts.
    """
    items = [(config.attackers, config.defender, cell, config.world, config.weight) for cell in config.cells]
    outcomes = parallel_map(_cell_outcome, items, workers)
    counts = {key: outcomes.count(key) for key in (CONFLICT_FREE, AVOIDED, NOT_AVOIDED, INVALID)}
    numerator = counts[AVOIDED]
    denominator = counts[AVOIDED] + counts[NOT_AVOIDED]
    sigma = numerator / denominator if denominator else None
    return SweepResult(sigma, numerator, denominator, outcomes, config.shape, counts)


def run_many(func: Callable, items: Iterable, workers: int | None = None) -> list:
    """Independent runs (Monte-Carlo, seeds) through :func:`parallel_map`."""
    return parallel_map(func, list(items), workers)
