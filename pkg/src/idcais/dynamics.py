"""Damped double-integrator agents: closed-form propagation and parameters.

Every agent obeys ``r' = v`` and ``v' = -C_D v + u`` with ``|u| <= u_max``.
Under a constant (zero-order-hold) input the solution is exact::

    r(t) = r0 + E1(t) v0 + E2(t) u
    v(t) = exp(-C_D t) v0 + E1(t) u

so no numerical integration is used anywhere in the package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

Role = Literal["attacker", "defender"]

# Relative size of the defender's strict-inequality margin: u_eff = u_max - eps.
DEFAULT_MARGIN_FRACTION = 1e-3


def _vec2(value, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"{name} must be a length-2 vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr.tolist()}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AgentState:
    """Planar position [m] and velocity [m/s] of one agent."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _vec2(self.position, "position"))
        object.__setattr__(self, "velocity", _vec2(self.velocity, "velocity"))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AgentState):
            return NotImplemented
        return bool(
            np.array_equal(self.position, other.position)
            and np.array_equal(self.velocity, other.velocity)
        )

    def __hash__(self) -> int:
        return hash((tuple(self.position), tuple(self.velocity)))

    def __repr__(self) -> str:
        return f"AgentState(position={self.position.tolist()}, velocity={self.velocity.tolist()})"

    @property
    def speed(self) -> float:
        return math.hypot(self.velocity[0], self.velocity[1])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_array(cls, x) -> "AgentState":
        x = np.asarray(x, dtype=float)
        return cls(x[:2], x[2:4])


@dataclass(frozen=True)
class AgentParams:
    """Actuation limits and geometry of one agent.

    ``accel_margin`` is the defender's strict margin eps_d; the nominal
    interception control uses ``accel_bound - accel_margin`` so the safety
    filter's control-ball constraints stay strictly inactive at zero
    correction. It defaults to ``1e-3 * accel_bound`` for defenders and is
    ignored for attackers.
    """

    accel_bound: float
    drag: float = 0.5
    body_radius: float = 0.5
    role: Role = "defender"
    accel_margin: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.accel_bound) and self.accel_bound > 0):
            raise ValueError(f"accel_bound must be > 0, got {self.accel_bound}")
        if not (math.isfinite(self.drag) and self.drag > 0):
            raise ValueError(f"drag must be > 0, got {self.drag}")
        if not (math.isfinite(self.body_radius) and self.body_radius >= 0):
            raise ValueError(f"body_radius must be >= 0, got {self.body_radius}")
        if self.role not in ("attacker", "defender"):
            raise ValueError(f"role must be 'attacker' or 'defender', got {self.role!r}")
        if self.accel_margin is not None and not (0 < self.accel_margin < self.accel_bound):
            raise ValueError(
                f"accel_margin must lie in (0, accel_bound), got {self.accel_margin}"
            )

    @property
    def speed_cap(self) -> float:
        return self.accel_bound / self.drag

    @property
    def margin(self) -> float:
        if self.role == "attacker":
            return 0.0
        if self.accel_margin is None:
            return DEFAULT_MARGIN_FRACTION * self.accel_bound
        return self.accel_margin

    @property
    def effective_bound(self) -> float:
        """Control magnitude used by the time-optimal policy."""
        return self.accel_bound - self.margin


def attacker_params(accel_bound: float = 3.0, drag: float = 0.5, body_radius: float = 0.5) -> AgentParams:
    return AgentParams(accel_bound, drag, body_radius, "attacker")


def defender_params(
    accel_bound: float = 3.4,
    drag: float = 0.5,
    body_radius: float = 0.5,
    accel_margin: float | None = None,
) -> AgentParams:
    return AgentParams(accel_bound, drag, body_radius, "defender", accel_margin)


@dataclass(frozen=True, eq=False)
class WorldParams:
    """Protected disc and interaction radii (all in metres)."""

    protected_center: np.ndarray = field(default_factory=lambda: np.zeros(2))
    protected_radius: float = 2.0
    capture_radius: float = 1.0
    collision_radius: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "protected_center", _vec2(self.protected_center, "protected_center")
        )
        for name in ("protected_radius", "capture_radius", "collision_radius"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be > 0, got {value}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WorldParams):
            return NotImplemented
        return (
            np.array_equal(self.protected_center, other.protected_center)
            and self.protected_radius == other.protected_radius
            and self.capture_radius == other.capture_radius
            and self.collision_radius == other.collision_radius
        )

    __hash__ = None  # type: ignore[assignment]


def growth_factors(t: float, drag: float) -> tuple[float, float]:
    """Return ``(E1(t), E2(t))`` for drag coefficient ``drag``.

    E1 = (1 - exp(-C_D t)) / C_D and E2 = (t - E1) / C_D. E2 is evaluated
    through a series for small ``C_D t`` to avoid cancellation.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    if not drag > 0:
        raise ValueError(f"drag must be positive, got {drag}")
    if math.isinf(t):
        return 1.0 / drag, math.inf
    x = drag * t
    e1 = -math.expm1(-x) / drag
    if x < 1e-3:
        e2 = t * t * (0.5 - x / 6.0 + x * x / 24.0 - x**3 / 120.0)
    else:
        e2 = (x + math.expm1(-x)) / (drag * drag)
    return e1, e2


def growth_factors_array(t: np.ndarray, drag: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`growth_factors` for an array of nonnegative times."""
    t = np.asarray(t, dtype=float)
    x = drag * t
    e1 = -np.expm1(-x) / drag
    small = x < 1e-3
    e2 = np.where(
        small,
        t * t * (0.5 - x / 6.0 + x * x / 24.0 - x**3 / 120.0),
        (x + np.expm1(-x)) / (drag * drag),
    )
    return e1, e2


def propagate(state: AgentState, u, dt: float, drag: float) -> AgentState:
    """Exact state after holding acceleration ``u`` for ``dt`` seconds."""
    u = _vec2(u, "u")
    if not math.isfinite(dt) or dt < 0:
        raise ValueError(f"dt must be finite and nonnegative, got {dt}")
    e1, e2 = growth_factors(dt, drag)
    decay = math.exp(-drag * dt)
    position = state.position + e1 * state.velocity + e2 * u
    velocity = decay * state.velocity + e1 * u
    return AgentState(position, velocity)


def position_at(state: AgentState, u, t, drag: float) -> np.ndarray:
    """Positions at times ``t`` (scalar or array) under constant ``u``.

    Returns shape ``(2,)`` for scalar ``t`` and ``(len(t), 2)`` otherwise.
    """
    u = np.asarray(u, dtype=float)
    if np.ndim(t) == 0:
        e1, e2 = growth_factors(float(t), drag)
        return state.position + e1 * state.velocity + e2 * u
    e1, e2 = growth_factors_array(np.asarray(t), drag)
    return state.position + e1[:, None] * state.velocity + e2[:, None] * u


def velocity_at(state: AgentState, u, t, drag: float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.ndim(t) == 0:
        e1, _ = growth_factors(float(t), drag)
        return math.exp(-drag * t) * state.velocity + e1 * u
    t = np.asarray(t, dtype=float)
    e1, _ = growth_factors_array(t, drag)
    return np.exp(-drag * t)[:, None] * state.velocity + e1[:, None] * u


def heading_vector(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])
