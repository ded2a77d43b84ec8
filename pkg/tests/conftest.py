import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from idcais.dynamics import AgentState, WorldParams, attacker_params, defender_params

settings.register_profile(
    "idcais", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("idcais")


# one report line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: acceptance-criteria checks (slow)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def world():
    return WorldParams()


@pytest.fixture
def pa():
    return attacker_params()


@pytest.fixture
def pd():
    return defender_params()


def random_state(rng, radius, speed_cap):
    r = radius * math.sqrt(rng.uniform()) * np.array([1.0, 0.0])
    phi = rng.uniform(0, 2 * math.pi)
    c, s = math.cos(phi), math.sin(phi)
    position = np.array([c * r[0], s * r[0]])
    speed = speed_cap * rng.uniform(0, 0.95)
    psi = rng.uniform(0, 2 * math.pi)
    return AgentState(position, speed * np.array([math.cos(psi), math.sin(psi)]))


def rk4(x0, u, t, drag, steps):
    """Explicit fourth-order integration of r'' = u - drag * r' (independent oracle)."""
    x = np.array(x0, dtype=float)
    h = t / steps

    def f(y):
        return np.concatenate([y[..., 2:], u - drag * y[..., 2:]], axis=-1)

    for _ in range(steps):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def boundary_pair(rng, world, params_d, params_a, tol=1e-8):
    """Defender/attacker states with |tau| < tol, found by bisection along a ray."""
    from idcais.engagement import solve_defender

    while True:
        x_d = random_state(rng, 12.0, 0.6 * params_d.speed_cap)
        phi = rng.uniform(0, 2 * math.pi)
        ray = np.array([math.cos(phi), math.sin(phi)])
        psi = rng.uniform(0, 2 * math.pi)
        v_a = rng.uniform(0, 0.6) * params_a.speed_cap * np.array([math.cos(psi), math.sin(psi)])

        def tau(s):
            x_a = AgentState(world.protected_center + s * ray, v_a)
            return solve_defender(x_d, x_a, world, params_d, params_a).tau

        lo, hi = world.protected_radius + 0.5, 80.0
        if not (tau(lo) > 0 > tau(hi)):
            continue
        while hi - lo > 1e-13 * hi:
            mid = 0.5 * (lo + hi)
            value = tau(mid)
            if abs(value) < tol:
                return x_d, AgentState(world.protected_center + mid * ray, v_a)
            if value > 0:
                lo = mid
            else:
                hi = mid


def dense_first_contact(plan_a, plan_b, rho, horizon, dt=1e-4):
    """Earliest sampled time with separation <= rho, by brute-force sampling."""
    from idcais.dynamics import growth_factors_array

    ts = np.arange(0.0, horizon + dt, dt)
    ts = ts[ts <= horizon + 1e-12]
    e1, e2 = growth_factors_array(ts, plan_a.drag)
    rel = (
        (plan_a.state.position - plan_b.state.position)
        + e1[:, None] * (plan_a.state.velocity - plan_b.state.velocity)
        + e2[:, None] * (plan_a.control - plan_b.control)
    )
    d = np.hypot(rel[:, 0], rel[:, 1])
    hits = np.flatnonzero(d <= rho)
    return (float(ts[hits[0]]) if hits.size else None), float(d.min())


def random_plan(rng, radius=15.0, bound=3.3966, drag=0.5, duration=None):
    from idcais.collision_forecast import Plan

    state = random_state(rng, radius, bound / drag)
    phi = rng.uniform(0, 2 * math.pi)
    t_f = rng.uniform(0.5, 8.0) if duration is None else duration
    return Plan(state, bound * np.array([math.cos(phi), math.sin(phi)]), t_f, drag)
