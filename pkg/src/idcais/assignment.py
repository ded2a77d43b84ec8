"""Defender-to-attacker assignment.

CADAA minimises ``(1-w) * sum C_int * delta + w * sum C_col * delta * delta``
over binary assignments where every attacker gets exactly one defender and
every defender takes at most one attacker (surplus defenders stay idle).
CUDAA drops the collision term. Both are solved exactly by depth-first
branch and bound; :func:`solve_exhaustive` enumerates every assignment and
serves as the reference.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .collision_forecast import T_EPS, ForecastTable, Plan, all_pairs_collision_times
from .dynamics import AgentParams, AgentState, WorldParams
from .engagement import EngagementSolution, solve_defender

LARGE_COST = 1e6
DEFAULT_WEIGHT = 0.5


@dataclass
class CostTables:
    """Interception costs ``c_int[j, i]`` and collision costs ``c_col[j, i, j2, i2]``."""

    c_int: np.ndarray
    c_col: np.ndarray
    large_cost: float = LARGE_COST
    weight: float = DEFAULT_WEIGHT
    engagements: dict[tuple[int, int], EngagementSolution] = field(default_factory=dict, repr=False)
    forecast: ForecastTable | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.c_int = np.asarray(self.c_int, dtype=float)
        n_d, n_a = self.c_int.shape
        self.c_col = np.asarray(self.c_col, dtype=float)
        if self.c_col.shape != (n_d, n_a, n_d, n_a):
            raise ValueError(f"c_col must have shape {(n_d, n_a, n_d, n_a)}, got {self.c_col.shape}")
        if n_d < n_a:
            raise ValueError(f"need at least as many defenders as attackers ({n_d} < {n_a})")
        if not 0 <= self.weight < 1:
            raise ValueError(f"weight must lie in [0, 1), got {self.weight}")

    @property
    def n_defenders(self) -> int:
        return self.c_int.shape[0]

    @property
    def n_attackers(self) -> int:
        return self.c_int.shape[1]

    def collision_entries(self) -> list[tuple[int, int, int, int, float]]:
        idx = np.argwhere(self.c_col != 0)
        return [(int(j), int(i), int(j2), int(i2), float(self.c_col[j, i, j2, i2])) for j, i, j2, i2 in idx]

    def to_dict(self) -> dict:
        return {
            "interception_cost": self.c_int.tolist(),
            "collision_cost": [
                {"defender": j, "attacker": i, "other_defender": j2, "other_attacker": i2, "cost": c}
                for j, i, j2, i2, c in self.collision_entries()
            ],
            "large_cost": self.large_cost,
            "weight": self.weight,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CostTables":
        c_int = np.asarray(doc["interception_cost"], dtype=float)
        n_d, n_a = c_int.shape
        c_col = np.zeros((n_d, n_a, n_d, n_a))
        for entry in doc.get("collision_cost", []):
            c_col[entry["defender"], entry["attacker"], entry["other_defender"], entry["other_attacker"]] = entry["cost"]
        return cls(c_int, c_col, doc.get("large_cost", LARGE_COST), doc.get("weight", DEFAULT_WEIGHT))


@dataclass(frozen=True)
class Assignment:
    """``attacker_of[j]`` is defender j's attacker or ``None`` when idle."""

    attacker_of: tuple[int | None, ...]
    objective: float
    n_attackers: int

    @property
    def defender_of(self) -> dict[int, int]:
        return {i: j for j, i in enumerate(self.attacker_of) if i is not None}

    @property
    def delta(self) -> np.ndarray:
        out = np.zeros((len(self.attacker_of), self.n_attackers), dtype=int)
        for j, i in enumerate(self.attacker_of):
            if i is not None:
                out[j, i] = 1
        return out

    def pairs(self) -> list[tuple[int, int]]:
        return [(j, i) for j, i in enumerate(self.attacker_of) if i is not None]

    def to_dict(self) -> dict:
        return {
            "attacker_of": list(self.attacker_of),
            "objective": self.objective,
            "delta": self.delta.tolist(),
        }


def objective(tables: CostTables, attacker_of: Sequence[int | None], weight: float | None = None) -> float:
    """Assignment cost recomputed from a defender-to-attacker map."""
    w = tables.weight if weight is None else weight
    pairs = [(j, i) for j, i in enumerate(attacker_of) if i is not None]
    linear = sum(tables.c_int[j, i] for j, i in pairs)
    quad = 0.0
    if w:
        for j, i in pairs:
            for j2, i2 in pairs:
                quad += tables.c_col[j, i, j2, i2]
    return (1 - w) * linear + w * quad


def build_cost_tables(
    defenders: Sequence[AgentState],
    attackers: Sequence[AgentState],
    world: WorldParams,
    params_d: AgentParams | Sequence[AgentParams],
    params_a: AgentParams | Sequence[AgentParams],
    *,
    weight: float = DEFAULT_WEIGHT,
    large_cost: float = LARGE_COST,
    t_eps: float = T_EPS,
    use_triangles: bool = True,
) -> CostTables:
    """Solve every 1v1 engagement and forecast every pairwise collision."""
    n_d, n_a = len(defenders), len(attackers)
    if not n_d >= n_a >= 1:
        raise ValueError(f"need N_d >= N_a >= 1, got N_d={n_d}, N_a={n_a}")
    pds = _per_agent(params_d, n_d)
    pas = _per_agent(params_a, n_a)
    c_int = np.empty((n_d, n_a))
    engagements: dict[tuple[int, int], EngagementSolution] = {}
    plans: dict[tuple[int, int], Plan] = {}
    for j, x_d in enumerate(defenders):
        for i, x_a in enumerate(attackers):
            sol = solve_defender(x_d, x_a, world, pds[j], pas[i])
            engagements[(j, i)] = sol
            plans[(j, i)] = Plan.from_engagement(x_d, sol, pds[j])
            c_int[j, i] = sol.defender_time if sol.tau <= 0 else large_cost
    forecast = all_pairs_collision_times(
        plans, world.collision_radius, t_eps=t_eps, use_triangles=use_triangles
    )
    c_col = np.zeros((n_d, n_a, n_d, n_a))
    for (j, i, j2, i2), t_col in forecast.times.items():
        c_col[j, i, j2, i2] = 1.0 / t_col
    return CostTables(c_int, c_col, large_cost, weight, engagements, forecast)


def _per_agent(params, n: int) -> list[AgentParams]:
    if isinstance(params, AgentParams):
        return [params] * n
    params = list(params)
    if len(params) != n:
        raise ValueError(f"expected {n} parameter sets, got {len(params)}")
    return params


def _tie_tol(value: float) -> float:
    if math.isinf(value):
        return 0.0
    return 1e-9 * max(1.0, abs(value))


def solve_exhaustive(tables: CostTables, weight: float | None = None) -> Assignment:
    """Reference solver: enumerate every injective attacker-to-defender map."""
    n_d, n_a = tables.n_defenders, tables.n_attackers
    best_map: tuple[int | None, ...] | None = None
    best = math.inf
    for chosen in itertools.permutations(range(n_d), n_a):
        attacker_of: list[int | None] = [None] * n_d
        for i, j in enumerate(chosen):
            attacker_of[j] = i
        value = objective(tables, attacker_of, weight)
        if value < best - _tie_tol(best):
            best, best_map = value, tuple(attacker_of)
    assert best_map is not None
    return Assignment(best_map, objective(tables, best_map), n_a)


def solve_cadaa(tables: CostTables) -> Assignment:
    """Exact collision-aware assignment."""
    return _branch_and_bound(tables, tables.weight)


def solve_cudaa(tables: CostTables) -> Assignment:
    """Exact min-sum assignment ignoring collisions.

    The returned ``objective`` is still evaluated with the tables' weight so
    it is directly comparable to :func:`solve_cadaa`.
    """
    return _branch_and_bound(tables, 0.0)


def _branch_and_bound(tables: CostTables, w: float) -> Assignment:
    n_d, n_a = tables.n_defenders, tables.n_attackers
    lin = (1 - w) * tables.c_int
    # pair[j, i, j2, i2] counts both orderings of a committed pair
    pair = w * (tables.c_col + tables.c_col.transpose(2, 3, 0, 1)) if w else None
    self_cost = w * np.einsum("jiji->ji", tables.c_col) if w else None

    chosen = [-1] * n_a
    used = [False] * n_d
    best = [math.inf]
    best_choice: list[list[int] | None] = [None]

    def increment(i: int, j: int, committed: int) -> float:
        inc = lin[j, i]
        if pair is not None:
            inc += self_cost[j, i]
            for i_prev in range(committed):
                inc += pair[j, i, chosen[i_prev], i_prev]
        return inc

    def bound(i_next: int) -> float:
        # each open attacker pays at least its cheapest free defender given
        # the committed pairs; interactions among open attackers are >= 0
        total = 0.0
        for i in range(i_next, n_a):
            total += min((increment(i, j, i_next) for j in range(n_d) if not used[j]), default=math.inf)
        return total

    def dfs(i: int, cost: float) -> None:
        if i == n_a:
            if cost < best[0] - _tie_tol(best[0]):
                best[0] = cost
                best_choice[0] = chosen.copy()
            return
        options = [(j, increment(i, j, i)) for j in range(n_d) if not used[j]]
        for j, inc in options:
            new_cost = cost + inc
            if new_cost >= best[0] - _tie_tol(best[0]):
                continue
            used[j] = True
            chosen[i] = j
            if i + 1 == n_a or new_cost + bound(i + 1) < best[0] - _tie_tol(best[0]):
                dfs(i + 1, new_cost)
            used[j] = False
            chosen[i] = -1

    dfs(0, 0.0)
    assert best_choice[0] is not None
    attacker_of: list[int | None] = [None] * n_d
    for i, j in enumerate(best_choice[0]):
        attacker_of[j] = i
    return Assignment(tuple(attacker_of), objective(tables, attacker_of), n_a)
