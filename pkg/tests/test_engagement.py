import math

import numpy as np
import pytest

from idcais.dynamics import AgentState, WorldParams, propagate
from idcais.engagement import (
    boundary_diagnostic,
    in_winning_region,
    solve_attacker,
    solve_defender,
    tau_dot_on_boundary,
)

from conftest import boundary_pair, random_state


def test_attacker_at_centre(world, pa):
    assert solve_attacker(AgentState([0, 0]), world, pa)[1] == 0.0


def test_attacker_dash_time(world, pa):
    shifted = WorldParams(protected_center=[3, -4])
    heading, t_a = solve_attacker(AgentState([13, -4]), shifted, pa)
    assert t_a == pytest.approx(3.2784, abs=1e-4)
    assert abs(abs(heading) - math.pi) < 1e-12


def test_attacker_rotation_equivariance(world, pa):
    x = AgentState([7, 2], [1, -0.5])
    angle = 0.9
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    h0, t0 = solve_attacker(x, world, pa)
    h1, t1 = solve_attacker(AgentState(rot @ x.position, rot @ x.velocity), world, pa)
    assert t1 == pytest.approx(t0, abs=1e-10)
    assert (h1 - h0 - angle + math.pi) % (2 * math.pi) - math.pi == pytest.approx(0, abs=1e-9)


def test_co_located(world, pa, pd):
    x = AgentState([10, 0], [1, 1])
    sol = solve_defender(x, x, world, pd, pa)
    assert sol.defender_time == 0.0
    assert sol.tau == -sol.attacker_time <= 0
    assert in_winning_region(x, x, world, pd, pa)[0]


def test_forward_propagation_meets(world, pa, pd):
    rng = np.random.default_rng(4)
    for _ in range(100):
        x_a = random_state(rng, 30, pa.speed_cap)
        x_d = random_state(rng, 30, pd.speed_cap)
        sol = solve_defender(x_d, x_a, world, pd, pa)
        t = sol.defender_time
        r_a = propagate(x_a, sol.attacker_control(pa.accel_bound), t, pa.drag).position
        r_d = propagate(x_d, sol.defender_control(pd), t, pd.drag).position
        assert np.linalg.norm(r_a - r_d) < 1e-6
        assert np.linalg.norm(sol.defender_control(pd)) == pytest.approx(pd.effective_bound)
        assert pd.effective_bound < pd.accel_bound


def test_attacker_wins_near_centre(pa, pd):
    small = WorldParams(protected_radius=0.2)
    x_a = AgentState([0.3, 0], [-5, 0])
    x_d = AgentState([-50, 0], [0, 0])
    sol = solve_defender(x_d, x_a, small, pd, pa)
    assert sol.attacker_time < 0.1
    assert sol.tau > 0
    assert not in_winning_region(x_d, x_a, small, pd, pa)[0]


def test_boundary_flips_membership(world, pa, pd):
    rng = np.random.default_rng(5)
    x_d, x_a = boundary_pair(rng, world, pd, pa)
    direction = x_a.position / np.linalg.norm(x_a.position)
    inside = AgentState(x_a.position + 1e-3 * direction, x_a.velocity)
    outside = AgentState(x_a.position - 1e-3 * direction, x_a.velocity)
    assert in_winning_region(x_d, inside, world, pd, pa)[0]
    assert not in_winning_region(x_d, outside, world, pd, pa)[0]


def test_rejects_faster_attacker(world, pd):
    from idcais.dynamics import attacker_params

    with pytest.raises(ValueError):
        solve_defender(AgentState([0, 5]), AgentState([10, 0]), world, pd, attacker_params(3.4))


def test_tau_dot_zero_deviation(world, pa, pd):
    x_d, x_a = boundary_pair(np.random.default_rng(6), world, pd, pa)
    assert tau_dot_on_boundary(x_d, x_a, world, pd, pa, [0, 0]) == 0.0


def test_tau_dot_stop_accelerating(world, pa, pd):
    rng = np.random.default_rng(7)
    for _ in range(10):
        x_d, x_a = boundary_pair(rng, world, pd, pa)
        sol = solve_defender(x_d, x_a, world, pd, pa)
        assert tau_dot_on_boundary(x_d, x_a, world, pd, pa, -sol.attacker_control(pa.accel_bound)) <= 1e-9


def test_tau_dot_matches_finite_difference(world, pa, pd):
    # oracle: advance both agents by h (attacker deviating) and difference tau
    rng = np.random.default_rng(8)
    h = 1e-5
    for _ in range(5):
        x_d, x_a = boundary_pair(rng, world, pd, pa)
        sol = solve_defender(x_d, x_a, world, pd, pa)
        u_a = sol.attacker_control(pa.accel_bound)
        phi = rng.uniform(0, 2 * math.pi)
        delta = pa.accel_bound * np.array([math.cos(phi), math.sin(phi)]) - u_a
        predicted = tau_dot_on_boundary(x_d, x_a, world, pd, pa, delta)

        def tau_after(sign):
            xa = propagate(x_a, u_a + delta, sign * h, pa.drag) if sign > 0 else x_a
            xd = propagate(x_d, sol.defender_control(pd), sign * h, pd.drag) if sign > 0 else x_d
            return solve_defender(xd, xa, world, pd, pa).tau

        fd = (tau_after(1) - tau_after(0)) / h
        assert fd == pytest.approx(predicted, abs=2e-4 + 2e-3 * abs(predicted))


def test_boundary_checks(world, pa, pd):
    x_d, x_a = boundary_pair(np.random.default_rng(9), world, pd, pa)
    with pytest.raises(ValueError):
        tau_dot_on_boundary(x_d, x_a, world, pd, pa, [10, 0])
    with pytest.raises(ValueError):
        tau_dot_on_boundary(AgentState(x_a.position), x_a, world, pd, pa, [0, 0])
    diag = boundary_diagnostic(x_d, x_a, world, pd, pa, [0, 0])
    sol = solve_defender(x_d, x_a, world, pd, pa)
    from idcais.dynamics import growth_factors

    e1 = growth_factors(sol.defender_time, pd.drag)[0]
    assert diag.gamma == pytest.approx(e1 * diag.gamma_d / (diag.gamma_a * diag.gamma_d0))


def test_resolving_reproduces_plan(world, pa, pd):
    # both play optimally: the re-solved plan is the same plan, shifted in time
    rng = np.random.default_rng(10)
    for _ in range(10):
        x_a = random_state(rng, 25, pa.speed_cap)
        x_d = random_state(rng, 25, pd.speed_cap)
        sol = solve_defender(x_d, x_a, world, pd, pa)
        if sol.defender_time < 1.0 or sol.tau > 0:
            continue
        for elapsed in (0.3, 0.7 * sol.defender_time):
            xa = propagate(x_a, sol.attacker_control(pa.accel_bound), elapsed, pa.drag)
            xd = propagate(x_d, sol.defender_control(pd), elapsed, pd.drag)
            again = solve_defender(xd, xa, world, pd, pa)
            assert again.defender_time == pytest.approx(sol.defender_time - elapsed, abs=1e-6)
            diff = (again.defender_heading - sol.defender_heading + math.pi) % (2 * math.pi) - math.pi
            assert abs(diff) < 1e-6
