"""Closed-loop simulation of assignment, interception and the safety filter."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..assignment import Assignment, build_cost_tables, solve_cadaa, solve_cudaa
from ..dynamics import AgentState, propagate
from ..engagement import solve_attacker, solve_defender
from ..safety_filter import filter_controls
from .scenario import Scenario

CSV_HEADER = ("t", "agent_id", "role", "x", "y", "vx", "vy", "ux", "uy", "status")


def attacker_policy_evasive(x_a: AgentState, defender_positions, accel_bound: float, protected_center) -> np.ndarray:
    """Equal blend of fleeing the nearest defender and heading for the protected centre."""
    r = x_a.position
    pts = np.asarray(defender_positions, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("the evasive policy needs at least one defender")
    home = np.asarray(protected_center, dtype=float) - r
    home_norm = math.hypot(home[0], home[1])
    home = home / home_norm if home_norm > 0 else np.zeros(2)
    offsets = r - pts
    dists = np.hypot(offsets[:, 0], offsets[:, 1])
    nearest = int(np.argmin(dists))
    flee = offsets[nearest] / dists[nearest] if dists[nearest] > 0 else np.zeros(2)
    blend = 0.5 * flee + 0.5 * home
    norm = math.hypot(blend[0], blend[1])
    if norm < 1e-12:
        # flee and home cancel; keep heading home
        blend, norm = home, 1.0
    return accel_bound * blend / norm


def attacker_policy_optimal(x_a: AgentState, scenario: Scenario, i: int) -> np.ndarray:
    params = scenario.attackers[i][1]
    theta, _ = solve_attacker(x_a, scenario.world, params)
    return params.accel_bound * np.array([math.cos(theta), math.sin(theta)])


@dataclass
class TrajectoryLog:
    """Per-step states, applied controls and statuses of every agent, plus events.

    Agents are ordered attackers first (``A0..``), then defenders (``D0..``).
    """

    agent_ids: list[str]
    roles: list[str]
    times: np.ndarray  # (T,)
    positions: np.ndarray  # (T, N, 2)
    velocities: np.ndarray  # (T, N, 2)
    controls: np.ndarray  # (T, N, 2)
    status: list[list[str]]  # (T, N)
    events: list[dict] = field(default_factory=list)
    active_rows: np.ndarray | None = None  # (T,) ECBF rows violated at zero correction
    correction_norms: np.ndarray | None = None  # (T,) |du| of the joint correction

    def write_csv(self, out) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for k, t in enumerate(self.times):
            for n, agent in enumerate(self.agent_ids):
                r, v, u = self.positions[k, n], self.velocities[k, n], self.controls[k, n]
                writer.writerow([
                    repr(float(t)), agent, self.roles[n],
                    repr(float(r[0])), repr(float(r[1])), repr(float(v[0])), repr(float(v[1])),
                    repr(float(u[0])), repr(float(u[1])), self.status[k][n],
                ])

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def events_json(self) -> str:
        return json.dumps(self.events, indent=2, sort_keys=True) + "\n"

    def write(self, directory: str | Path, stem: str = "trajectory") -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{stem}.csv"
        events_path = directory / f"{stem}_events.json"
        with csv_path.open("w", newline="") as fh:
            self.write_csv(fh)
        events_path.write_text(self.events_json())
        return csv_path, events_path


@dataclass
class Outcome:
    captures: int
    breaches: int
    active: int
    min_defender_separation: float
    min_separation_time: float | None
    interception_times: dict[int, float]
    captured_by: dict[int, int]
    breach_times: dict[int, float]
    first_collision_time: float | None
    assignments: list[dict]
    relaxed_steps: int
    assumption3_steps: int
    final_time: float

    @property
    def objective(self) -> float:
        """Objective value of the initial assignment."""
        return self.assignments[0]["objective"]

    def to_dict(self) -> dict:
        return {
            "captures": self.captures,
            "breaches": self.breaches,
            "active": self.active,
            "min_defender_separation": None if math.isinf(self.min_defender_separation) else self.min_defender_separation,
            "min_separation_time": self.min_separation_time,
            "interception_times": {str(i): t for i, t in sorted(self.interception_times.items())},
            "captured_by": {str(i): j for i, j in sorted(self.captured_by.items())},
            "breach_times": {str(i): t for i, t in sorted(self.breach_times.items())},
            "first_collision_time": self.first_collision_time,
            "assignments": self.assignments,
            "relaxed_steps": self.relaxed_steps,
            "assumption3_steps": self.assumption3_steps,
            "final_time": self.final_time,
        }


def _assign(scenario: Scenario, x_att, x_def, active_attackers: list[int]) -> tuple[Assignment, list[int]]:
    tables = build_cost_tables(
        [x_def[j] for j in range(scenario.n_defenders)],
        [x_att[i] for i in active_attackers],
        scenario.world,
        [p for _, p in scenario.defenders],
        [scenario.attackers[i][1] for i in active_attackers],
        weight=scenario.weight,
    )
    solver = solve_cadaa if scenario.assignment_mode == "cadaa" else solve_cudaa
    return solver(tables), active_attackers


def run_simulation(scenario: Scenario, *, assignment: Assignment | None = None) -> tuple[TrajectoryLog, Outcome]:
    """Simulate ``scenario`` until no attacker is active or ``t > t_max``.

    ``assignment`` replaces the t=0 assignment solve (it must cover every
    attacker); later reassignments are still solved in the loop.
    """
    s = scenario
    world = s.world
    n_a, n_d = s.n_attackers, s.n_defenders
    drag = s.drag
    dt = s.dt
    x_att = [a[0] for a in s.attackers]
    x_def = [d[0] for d in s.defenders]
    p_att = [a[1] for a in s.attackers]
    p_def = [d[1] for d in s.defenders]
    center = world.protected_center
    rho_int, rho_p, rho_col = world.capture_radius, world.protected_radius, world.collision_radius

    att_status = ["active"] * n_a
    target: list[int | None] = [None] * n_d
    events: list[dict] = []
    assignments: list[dict] = []
    interception: dict[int, float] = {}
    captured_by: dict[int, int] = {}
    breach_times: dict[int, float] = {}
    min_sep, min_sep_t = math.inf, None
    first_collision: float | None = None
    colliding: set[tuple[int, int]] = set()
    relaxed_steps = assumption3_steps = 0

    times: list[float] = []
    positions: list[np.ndarray] = []
    velocities: list[np.ndarray] = []
    controls: list[np.ndarray] = []
    statuses: list[list[str]] = []
    active_rows: list[int] = []
    correction_norms: list[float] = []

    def record(t: float, u_att, u_def, n_rows: int, du_norm: float) -> None:
        times.append(t)
        positions.append(np.array([x.position for x in x_att + x_def]))
        velocities.append(np.array([x.velocity for x in x_att + x_def]))
        controls.append(np.vstack([u_att, u_def]))
        statuses.append(att_status + ["active" if target[j] is not None else "idle" for j in range(n_d)])
        active_rows.append(n_rows)
        correction_norms.append(du_norm)

    step = 0
    while True:
        t = step * dt
        # separation bookkeeping on the current state
        for j in range(n_d):
            for k in range(j + 1, n_d):
                dist = float(np.linalg.norm(x_def[j].position - x_def[k].position))
                if dist < min_sep:
                    min_sep, min_sep_t = dist, t
                if dist < rho_col and (j, k) not in colliding:
                    colliding.add((j, k))
                    events.append({"type": "defender_collision", "t": t, "defenders": [j, k], "distance": dist})
                    if first_collision is None:
                        first_collision = t
                elif dist >= rho_col:
                    colliding.discard((j, k))
        # captures are checked before breaches, so one attacker never gets both
        captured_now = False
        for i in range(n_a):
            if att_status[i] != "active":
                continue
            dists = [float(np.linalg.norm(x_def[j].position - x_att[i].position)) for j in range(n_d)]
            j_best = int(np.argmin(dists))
            if dists[j_best] < rho_int:
                att_status[i] = "captured"
                interception[i] = t
                captured_by[i] = j_best
                captured_now = True
                events.append({"type": "capture", "t": t, "attacker": i, "defender": j_best, "distance": dists[j_best]})
            elif float(np.linalg.norm(x_att[i].position - center)) <= rho_p:
                att_status[i] = "breached"
                breach_times[i] = t
                events.append({"type": "breach", "t": t, "attacker": i})
        active = [i for i in range(n_a) if att_status[i] == "active"]
        if active and (step == 0 or (captured_now and s.reassign_on_capture)):
            if step == 0 and assignment is not None and len(active) == n_a:
                subset = list(range(n_a))
            else:
                assignment, subset = _assign(s, x_att, x_def, active)
            target = [None if a is None else subset[a] for a in assignment.attacker_of]
            assignments.append({"t": t, "attacker_of": list(target), "objective": float(assignment.objective)})
            events.append({"type": "assignment", "t": t, "attacker_of": list(target), "objective": float(assignment.objective)})
        for j in range(n_d):
            if target[j] is not None and att_status[target[j]] != "active":
                target[j] = None

        u_att = np.zeros((n_a, 2))
        u_def = np.zeros((n_d, 2))
        if not active or t > s.t_max:
            record(t, u_att, u_def, 0, 0.0)
            break
        for i in active:
            if s.attacker_policy == "optimal":
                u_att[i] = attacker_policy_optimal(x_att[i], s, i)
            else:
                u_att[i] = attacker_policy_evasive(x_att[i], [x.position for x in x_def], p_att[i].accel_bound, center)
        for j in range(n_d):
            if target[j] is not None:
                i = target[j]
                sol = solve_defender(x_def[j], x_att[i], world, p_def[j], p_att[i])
                u_def[j] = sol.defender_control(p_def[j])
        n_rows, du_norm = 0, 0.0
        if s.cbf_enabled and n_d >= 2:
            res = filter_controls(x_def, u_def, p_def[0], rho_col, gain=s.gain)
            n_rows = len(res.active_pairs)
            du_norm = float(np.linalg.norm(res.corrections))
            u_def = u_def + res.corrections
            # the ball constraint holds to solver precision; clip the last ulp
            norms = np.hypot(u_def[:, 0], u_def[:, 1])
            over = norms > p_def[0].accel_bound
            u_def[over] *= (p_def[0].accel_bound / norms[over])[:, None]
            if res.relaxed:
                relaxed_steps += 1
                events.append({"type": "relaxed_filter", "t": t, "active_rows": n_rows})
            if res.assumption3_violated:
                assumption3_steps += 1
                events.append({"type": "assumption3", "t": t, "active_rows": n_rows})
        record(t, u_att, u_def, n_rows, du_norm)
        for i in range(n_a):
            if att_status[i] == "active":
                x_att[i] = propagate(x_att[i], u_att[i], dt, drag)
        for j in range(n_d):
            x_def[j] = propagate(x_def[j], u_def[j], dt, drag)
        step += 1

    if min_sep_t is not None:
        events.append({"type": "min_defender_separation", "t": min_sep_t, "distance": min_sep})
    log = TrajectoryLog(
        [f"A{i}" for i in range(n_a)] + [f"D{j}" for j in range(n_d)],
        ["attacker"] * n_a + ["defender"] * n_d,
        np.array(times),
        np.array(positions),
        np.array(velocities),
        np.array(controls),
        statuses,
        events,
        np.array(active_rows),
        np.array(correction_norms),
    )
    outcome = Outcome(
        captures=len(interception),
        breaches=len(breach_times),
        active=sum(1 for st in att_status if st == "active"),
        min_defender_separation=min_sep,
        min_separation_time=min_sep_t,
        interception_times=interception,
        captured_by=captured_by,
        breach_times=breach_times,
        first_collision_time=first_collision,
        assignments=assignments,
        relaxed_steps=relaxed_steps,
        assumption3_steps=assumption3_steps,
        final_time=times[-1],
    )
    return log, outcome
