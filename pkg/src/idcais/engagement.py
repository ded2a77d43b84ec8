"""One defender against one attacker.

The attacker dashes time-optimally to the protected centre; the defender
intercepts that dash time-optimally (best against worst). Both policies
are constant headings, recomputed from the current states whenever called.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import AgentParams, AgentState, WorldParams, growth_factors
from .time_optimal import solve_min_time, solve_reach

BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class EngagementSolution:
    attacker_heading: float
    attacker_time: float
    defender_heading: float
    defender_time: float

    @property
    def tau(self) -> float:
        """Time margin; nonpositive means the defender wins."""
        return self.defender_time - self.attacker_time

    def attacker_control(self, accel_bound: float) -> np.ndarray:
        return accel_bound * np.array([math.cos(self.attacker_heading), math.sin(self.attacker_heading)])

    def defender_control(self, params_d: AgentParams) -> np.ndarray:
        return params_d.effective_bound * np.array(
            [math.cos(self.defender_heading), math.sin(self.defender_heading)]
        )


@dataclass(frozen=True)
class BoundaryDiagnostic:
    gamma_a: float
    gamma_d: float
    gamma_d0: float
    gamma: float
    tau_dot: float


def solve_attacker(x_a: AgentState, world: WorldParams, params_a: AgentParams) -> tuple[float, float]:
    """Heading and time of the attacker's fastest dash to the protected centre."""
    sol = solve_min_time(x_a, world.protected_center, params_a.accel_bound, params_a.drag)
    return sol.heading, sol.terminal_time


def solve_defender(
    x_d: AgentState,
    x_a: AgentState,
    world: WorldParams,
    params_d: AgentParams,
    params_a: AgentParams,
) -> EngagementSolution:
    """Best-against-worst interception of ``x_a`` by ``x_d``.

    Requires ``params_a.accel_bound <= params_d.effective_bound``.
    """
    if params_a.accel_bound > params_d.effective_bound:
        raise ValueError(
            f"attacker bound {params_a.accel_bound} exceeds defender bound "
            f"{params_d.effective_bound}; interception is not guaranteed"
        )
    if params_a.drag != params_d.drag:
        raise ValueError("attacker and defender must share one drag coefficient")
    theta_a, t_a = solve_attacker(x_a, world, params_a)
    u_a = params_a.accel_bound * np.array([math.cos(theta_a), math.sin(theta_a)])
    sol = solve_reach(
        x_d.position - x_a.position,
        x_d.velocity - x_a.velocity,
        -u_a,
        params_d.effective_bound,
        params_d.drag,
    )
    return EngagementSolution(theta_a, t_a, sol.heading, sol.terminal_time)


def in_winning_region(
    x_d: AgentState,
    x_a: AgentState,
    world: WorldParams,
    params_d: AgentParams,
    params_a: AgentParams,
) -> tuple[bool, float]:
    """Whether ``x_a`` lies in the defender's winning region, with its margin tau."""
    tau = solve_defender(x_d, x_a, world, params_d, params_a).tau
    return tau <= 0, tau


def boundary_diagnostic(
    x_d: AgentState,
    x_a: AgentState,
    world: WorldParams,
    params_d: AgentParams,
    params_a: AgentParams,
    delta_u_a,
    *,
    boundary_tol: float = BOUNDARY_TOL,
) -> BoundaryDiagnostic:
    """Rate of change of tau when the attacker deviates by ``delta_u_a``.

    ``tau_dot = gamma * (cos th_a, sin th_a) . delta_u_a`` with the
    defender's effective bound in ``gamma_d`` and ``gamma_d0``.

    Valid only on the winning-region boundary (``|tau| < boundary_tol``)
    and for admissible deviations ``|u_a* + delta_u_a| <= u_a``.
    """
    delta = np.asarray(delta_u_a, dtype=float)
    sol = solve_defender(x_d, x_a, world, params_d, params_a)
    if abs(sol.tau) >= boundary_tol:
        raise ValueError(f"state is not on the winning-region boundary (tau={sol.tau:.3g} s)")
    u_a_bar = params_a.accel_bound
    u_a = sol.attacker_control(u_a_bar)
    slack = 1e-12 * max(1.0, u_a_bar**2)
    if float(np.dot(u_a + delta, u_a + delta)) > u_a_bar**2 + slack:
        raise ValueError("attacker deviation is not admissible")

    drag = params_d.drag
    u_d_bar = params_d.effective_bound
    th_a, th_d = sol.attacker_heading, sol.defender_heading
    t_a, t_d = sol.attacker_time, sol.defender_time
    dir_a = np.array([math.cos(th_a), math.sin(th_a)])
    dir_d = np.array([math.cos(th_d), math.sin(th_d)])
    e1_a, _ = growth_factors(t_a, drag)
    e1_d, _ = growth_factors(t_d, drag)
    gamma_a = math.exp(-drag * t_a) * float(x_a.velocity @ dir_a) + e1_a * u_a_bar
    gamma_d = math.exp(-drag * t_d) * float(x_d.velocity @ dir_d) + e1_d * u_d_bar
    rel_v = x_d.velocity - x_a.velocity
    gamma_d0 = math.exp(-drag * t_d) * float(rel_v @ dir_d) + e1_d * (
        u_d_bar - u_a_bar * math.cos(th_d - th_a)
    )
    gamma = e1_d * gamma_d / (gamma_a * gamma_d0)
    return BoundaryDiagnostic(gamma_a, gamma_d, gamma_d0, gamma, gamma * float(dir_a @ delta))


def tau_dot_on_boundary(x_d, x_a, world, params_d, params_a, delta_u_a, **kwargs) -> float:
    return boundary_diagnostic(x_d, x_a, world, params_d, params_a, delta_u_a, **kwargs).tau_dot
