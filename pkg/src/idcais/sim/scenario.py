"""Scenario definition and its JSON form."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Any, Literal

import numpy as np

from ..assignment import DEFAULT_WEIGHT
from ..dynamics import AgentParams, AgentState, WorldParams

AttackerPolicy = Literal["optimal", "evasive"]
AssignmentMode = Literal["cadaa", "cudaa"]

DEFAULT_DT = 0.01
DEFAULT_T_MAX = 60.0
DEFAULT_DRAG = 0.5
DEFAULT_ATTACKER_BOUND = 3.0
DEFAULT_DEFENDER_BOUND = 3.4
DEFAULT_BODY_RADIUS = 0.5


class ScenarioError(ValueError):
    """A scenario document or object failed validation.

    ``location`` is a JSON-path-like pointer (``$.attackers[1].position``)
    to the offending entry.
    """

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.message = message


Agent = tuple[AgentState, AgentParams]


@dataclass(frozen=True)
class Scenario:
    world: WorldParams
    attackers: tuple[Agent, ...]
    defenders: tuple[Agent, ...]
    weight: float = DEFAULT_WEIGHT
    gain: float | None = None  # None selects the smallest admissible ECBF gain
    dt: float = DEFAULT_DT
    t_max: float = DEFAULT_T_MAX
    attacker_policy: AttackerPolicy = "optimal"
    assignment_mode: AssignmentMode = "cadaa"
    cbf_enabled: bool = True
    reassign_on_capture: bool = False
    name: str = field(default="", compare=True)

    def __post_init__(self) -> None:
        object.__setattr__(self, "attackers", tuple(self.attackers))
        object.__setattr__(self, "defenders", tuple(self.defenders))
        validate(self)

    @property
    def n_attackers(self) -> int:
        return len(self.attackers)

    @property
    def n_defenders(self) -> int:
        return len(self.defenders)

    @property
    def drag(self) -> float:
        return self.defenders[0][1].drag

    def with_options(self, **changes) -> "Scenario":
        return replace(self, **changes)


def validate(s: Scenario) -> None:
    """Raise :class:`ScenarioError` naming the first violated invariant."""
    if not s.attackers:
        raise ScenarioError("$.attackers", "at least one attacker is required")
    if len(s.defenders) < len(s.attackers):
        raise ScenarioError(
            "$.defenders",
            f"invariant N_d >= N_a violated ({len(s.defenders)} defenders, {len(s.attackers)} attackers)",
        )
    if not 0 <= s.weight < 1:
        raise ScenarioError("$.weight", f"must lie in [0, 1), got {s.weight}")
    if s.gain is not None and not (math.isfinite(s.gain) and s.gain > 0):
        raise ScenarioError("$.gain", f"must be positive, got {s.gain}")
    if not (math.isfinite(s.dt) and s.dt > 0):
        raise ScenarioError("$.dt", f"must be positive, got {s.dt}")
    if not (math.isfinite(s.t_max) and s.t_max > 0):
        raise ScenarioError("$.t_max", f"must be positive, got {s.t_max}")
    if s.attacker_policy not in ("optimal", "evasive"):
        raise ScenarioError("$.attacker_policy", f"must be 'optimal' or 'evasive', got {s.attacker_policy!r}")
    if s.assignment_mode not in ("cadaa", "cudaa"):
        raise ScenarioError("$.assignment_mode", f"must be 'cadaa' or 'cudaa', got {s.assignment_mode!r}")
    drag = s.defenders[0][1].drag if s.defenders else s.attackers[0][1].drag
    for role, agents in (("attackers", s.attackers), ("defenders", s.defenders)):
        expected = role[:-1]
        for k, (_, params) in enumerate(agents):
            if params.role != expected:
                raise ScenarioError(f"$.{role}[{k}]", f"parameters carry role {params.role!r}")
            if params.drag != drag:
                raise ScenarioError(f"$.{role}[{k}].drag", f"all agents must share one drag coefficient ({drag})")
    for i, (x_a, p_a) in enumerate(s.attackers):
        dist = float(np.linalg.norm(x_a.position - s.world.protected_center))
        if dist <= s.world.protected_radius:
            raise ScenarioError(
                f"$.attackers[{i}].position",
                f"invariant 'attackers start outside the protected disc' violated (distance {dist:.6g} <= {s.world.protected_radius})",
            )
        if x_a.speed > p_a.speed_cap * (1 + 1e-12):
            raise ScenarioError(f"$.attackers[{i}].velocity", f"speed {x_a.speed:.6g} exceeds cap {p_a.speed_cap:.6g}")
        for j, (_, p_d) in enumerate(s.defenders):
            if p_a.accel_bound > p_d.effective_bound:
                raise ScenarioError(
                    f"$.defenders[{j}].accel_bound",
                    f"defender effective bound {p_d.effective_bound:.6g} must be at least attacker {i}'s {p_a.accel_bound:.6g}",
                )
    for j, (x_d, p_d) in enumerate(s.defenders):
        if x_d.speed > p_d.speed_cap * (1 + 1e-12):
            raise ScenarioError(f"$.defenders[{j}].velocity", f"speed {x_d.speed:.6g} exceeds cap {p_d.speed_cap:.6g}")
    rho = s.world.collision_radius
    for j in range(len(s.defenders)):
        for k in range(j + 1, len(s.defenders)):
            dist = float(np.linalg.norm(s.defenders[j][0].position - s.defenders[k][0].position))
            if dist <= rho:
                raise ScenarioError(
                    f"$.defenders[{k}].position",
                    f"invariant 'defender separations > collision_radius' violated by defenders {j} and {k} "
                    f"(distance {dist:.6g} <= {rho})",
                )
    if s.cbf_enabled and len({p for _, p in s.defenders}) > 1:
        raise ScenarioError("$.defenders", "the safety filter needs identical defender parameters")


# ---------------------------------------------------------------- JSON form

_TOP_FIELDS = {
    "name", "world", "attackers", "defenders", "weight", "gain", "dt", "t_max",
    "attacker_policy", "assignment_mode", "cbf_enabled", "reassign_on_capture",
}
_WORLD_FIELDS = {"protected_center", "protected_radius", "capture_radius", "collision_radius"}
_ATTACKER_FIELDS = {"position", "velocity", "accel_bound", "drag", "body_radius"}
_DEFENDER_FIELDS = _ATTACKER_FIELDS | {"accel_margin"}


def _check_keys(doc: Any, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(doc, dict):
        raise ScenarioError(where, f"expected an object, got {type(doc).__name__}")
    for key in doc:
        if key not in allowed:
            raise ScenarioError(f"{where}.{key}", "unknown field")
    for key in sorted(required - set(doc)):
        raise ScenarioError(f"{where}.{key}", "missing required field")


def _number(doc: dict, key: str, where: str, default=None, *, allow_none: bool = False) -> Any:
    value = doc.get(key, default)
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ScenarioError(f"{where}.{key}", f"expected a finite number, got {value!r}")
    return float(value)


def _vector(doc: dict, key: str, where: str, default=None) -> np.ndarray:
    value = doc.get(key, default)
    loc = f"{where}.{key}"
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) for v in value)
    ):
        raise ScenarioError(loc, f"expected two finite numbers, got {value!r}")
    return np.array(value, dtype=float)


def _flag(doc: dict, key: str, where: str, default: bool) -> bool:
    value = doc.get(key, default)
    if not isinstance(value, bool):
        raise ScenarioError(f"{where}.{key}", f"expected true or false, got {value!r}")
    return value


def _choice(doc: dict, key: str, where: str, default: str, options: tuple[str, ...]) -> str:
    value = doc.get(key, default)
    if value not in options:
        raise ScenarioError(f"{where}.{key}", f"expected one of {list(options)}, got {value!r}")
    return value


def _agent(doc: Any, role: str, where: str) -> Agent:
    fields = _DEFENDER_FIELDS if role == "defender" else _ATTACKER_FIELDS
    _check_keys(doc, fields, {"position"}, where)
    state = AgentState(_vector(doc, "position", where), _vector(doc, "velocity", where, [0.0, 0.0]))
    bound_default = DEFAULT_DEFENDER_BOUND if role == "defender" else DEFAULT_ATTACKER_BOUND
    kwargs = dict(
        accel_bound=_number(doc, "accel_bound", where, bound_default),
        drag=_number(doc, "drag", where, DEFAULT_DRAG),
        body_radius=_number(doc, "body_radius", where, DEFAULT_BODY_RADIUS),
        role=role,
    )
    if role == "defender":
        kwargs["accel_margin"] = _number(doc, "accel_margin", where, None, allow_none=True)
    try:
        params = AgentParams(**kwargs)
    except ValueError as exc:
        raise ScenarioError(where, str(exc)) from None
    return state, params


def from_dict(doc: Any) -> Scenario:
    """Build a scenario from its JSON object, filling documented defaults."""
    _check_keys(doc, _TOP_FIELDS, {"attackers", "defenders"}, "$")
    world_doc = doc.get("world", {})
    _check_keys(world_doc, _WORLD_FIELDS, set(), "$.world")
    try:
        world = WorldParams(
            _vector(world_doc, "protected_center", "$.world", [0.0, 0.0]),
            _number(world_doc, "protected_radius", "$.world", 2.0),
            _number(world_doc, "capture_radius", "$.world", 1.0),
            _number(world_doc, "collision_radius", "$.world", 2.0),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError("$.world", str(exc)) from None
    agents = {}
    for role in ("attackers", "defenders"):
        items = doc[role]
        if not isinstance(items, list):
            raise ScenarioError(f"$.{role}", "expected a list")
        agents[role] = tuple(_agent(item, role[:-1], f"$.{role}[{k}]") for k, item in enumerate(items))
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ScenarioError("$.name", f"expected a string, got {name!r}")
    return Scenario(
        world=world,
        attackers=agents["attackers"],
        defenders=agents["defenders"],
        weight=_number(doc, "weight", "$", DEFAULT_WEIGHT),
        gain=_number(doc, "gain", "$", None, allow_none=True),
        dt=_number(doc, "dt", "$", DEFAULT_DT),
        t_max=_number(doc, "t_max", "$", DEFAULT_T_MAX),
        attacker_policy=_choice(doc, "attacker_policy", "$", "optimal", ("optimal", "evasive")),
        assignment_mode=_choice(doc, "assignment_mode", "$", "cadaa", ("cadaa", "cudaa")),
        cbf_enabled=_flag(doc, "cbf_enabled", "$", True),
        reassign_on_capture=_flag(doc, "reassign_on_capture", "$", False),
        name=name,
    )


def _agent_dict(state: AgentState, params: AgentParams) -> dict:
    out = {
        "position": [float(v) for v in state.position],
        "velocity": [float(v) for v in state.velocity],
        "accel_bound": params.accel_bound,
        "drag": params.drag,
        "body_radius": params.body_radius,
    }
    if params.role == "defender":
        out["accel_margin"] = params.accel_margin
    return out


def to_dict(s: Scenario) -> dict:
    """Canonical JSON object: every field explicit."""
    return {
        "name": s.name,
        "world": {
            "protected_center": [float(v) for v in s.world.protected_center],
            "protected_radius": s.world.protected_radius,
            "capture_radius": s.world.capture_radius,
            "collision_radius": s.world.collision_radius,
        },
        "attackers": [_agent_dict(*a) for a in s.attackers],
        "defenders": [_agent_dict(*d) for d in s.defenders],
        "weight": s.weight,
        "gain": s.gain,
        "dt": s.dt,
        "t_max": s.t_max,
        "attacker_policy": s.attacker_policy,
        "assignment_mode": s.assignment_mode,
        "cbf_enabled": s.cbf_enabled,
        "reassign_on_capture": s.reassign_on_capture,
    }


def dumps(s: Scenario) -> str:
    """Canonical serialisation (sorted keys, shortest round-trip floats)."""
    return json.dumps(to_dict(s), sort_keys=True, indent=2) + "\n"


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}", f"malformed JSON: {exc.msg}") from None
    return from_dict(doc)


def load(source: str | Path | IO[str]) -> Scenario:
    if hasattr(source, "read"):
        return loads(source.read())  # type: ignore[union-attr]
    return loads(Path(source).read_text())


def save(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(s))


def make_scenario(
    attackers,
    defenders,
    *,
    world: WorldParams | None = None,
    attacker_bound: float = DEFAULT_ATTACKER_BOUND,
    defender_bound: float = DEFAULT_DEFENDER_BOUND,
    drag: float = DEFAULT_DRAG,
    **options,
) -> Scenario:
    """Scenario from ``(position, velocity)`` pairs with shared default parameters."""
    p_a = AgentParams(attacker_bound, drag, DEFAULT_BODY_RADIUS, "attacker")
    p_d = AgentParams(defender_bound, drag, DEFAULT_BODY_RADIUS, "defender")
    return Scenario(
        world=world or WorldParams(),
        attackers=tuple((AgentState(r, v), p_a) for r, v in attackers),
        defenders=tuple((AgentState(r, v), p_d) for r, v in defenders),
        **options,
    )
