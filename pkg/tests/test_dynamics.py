import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idcais.dynamics import (
    AgentParams,
    AgentState,
    WorldParams,
    attacker_params,
    defender_params,
    growth_factors,
    growth_factors_array,
    position_at,
    propagate,
    velocity_at,
)

from conftest import rk4

finite = st.floats(-20, 20, allow_nan=False)
vec = st.tuples(finite, finite)
drag_st = st.floats(0.05, 3.0)


def test_growth_factors_at_zero():
    assert growth_factors(0.0, 0.5) == (0.0, 0.0)


def test_growth_factors_at_one():
    e1 = (1 - math.exp(-0.5)) / 0.5
    e2 = (1 - e1) / 0.5
    got = growth_factors(1.0, 0.5)
    assert got[0] == pytest.approx(e1, rel=1e-14)
    assert got[1] == pytest.approx(e2, rel=1e-12)
    assert got == pytest.approx((0.78694, 0.42612), abs=1e-5)


def test_growth_factors_limit():
    e1, e2 = growth_factors(200.0, 0.5)
    assert e1 == pytest.approx(2.0, rel=1e-12)
    assert growth_factors(math.inf, 0.5) == (2.0, math.inf)


def test_growth_factors_rejects_negative_time():
    with pytest.raises(ValueError):
        growth_factors(-1e-9, 0.5)
    with pytest.raises(ValueError):
        growth_factors(1.0, 0.0)


@given(st.floats(0, 50), st.floats(1e-9, 5), drag_st)
def test_growth_factors_increasing(t, dt, drag):
    a1, a2 = growth_factors(t, drag)
    b1, b2 = growth_factors(t + dt, drag)
    assert a1 >= 0 and a2 >= 0
    assert b1 >= a1 and b2 >= a2
    assert a1 <= 1 / drag


def test_small_time_series_matches_direct_formula():
    # away from the cancellation region both branches must agree
    t = np.array([1.9e-3, 2.1e-3, 0.5, 3.0])
    e1, e2 = growth_factors_array(t, 0.5)
    direct = (t - (1 - np.exp(-0.5 * t)) / 0.5) / 0.5
    assert np.allclose(e2, direct, rtol=1e-9)
    for k, tk in enumerate(t):
        assert (e1[k], e2[k]) == pytest.approx(growth_factors(float(tk), 0.5), rel=1e-14)


def test_rest_stays_at_rest():
    s = propagate(AgentState([0, 0], [0, 0]), [0, 0], 7.3, 0.5)
    assert np.array_equal(s.position, [0, 0]) and np.array_equal(s.velocity, [0, 0])


def test_terminal_speed_is_bound_over_drag():
    s = propagate(AgentState([0, 0], [0, 0]), [3, 0], 100.0, 0.5)
    assert s.speed == pytest.approx(6.0, rel=1e-12)


def test_coasting_decay():
    s = propagate(AgentState([0, 0], [1, 0]), [0, 0], 1.0, 0.5)
    assert s.velocity == pytest.approx([math.exp(-0.5), 0.0], abs=1e-15)
    assert s.position == pytest.approx([growth_factors(1.0, 0.5)[0], 0.0], abs=1e-15)


def test_non_finite_inputs_rejected():
    with pytest.raises(ValueError):
        AgentState([math.nan, 0.0])
    with pytest.raises(ValueError):
        propagate(AgentState([0, 0]), [math.inf, 0], 1.0, 0.5)
    with pytest.raises(ValueError):
        propagate(AgentState([0, 0]), [0, 0], -1.0, 0.5)


def test_exact_matches_numerical_integration():
    rng = np.random.default_rng(1)
    for _ in range(10):
        x0 = rng.uniform(-10, 10, 4)
        u = rng.uniform(-3, 3, 2)
        drag = rng.uniform(0.1, 2.0)
        ref = rk4(x0, u, 1.0, drag, 2000)
        s = propagate(AgentState.from_array(x0), u, 1.0, drag)
        assert np.allclose(s.as_array(), ref, rtol=1e-6, atol=1e-9)


@given(vec, vec, vec, st.floats(0, 5), st.floats(0, 5), drag_st)
def test_semigroup(r, v, u, a, b, drag):
    x = AgentState(r, v)
    two = propagate(propagate(x, u, a, drag), u, b, drag)
    one = propagate(x, u, a + b, drag)
    scale = 1 + np.max(np.abs(one.as_array()))
    assert np.allclose(two.as_array(), one.as_array(), rtol=0, atol=1e-10 * scale)


@given(st.floats(0.5, 5), drag_st, st.floats(0, 0.999), st.floats(0, 2 * math.pi),
       st.floats(0, 1), st.floats(0, 2 * math.pi), st.floats(0, 30))
def test_speed_bound_preserved(bound, drag, frac, psi, ufrac, phi, t):
    cap = bound / drag
    v0 = frac * cap * np.array([math.cos(psi), math.sin(psi)])
    u = ufrac * bound * np.array([math.cos(phi), math.sin(phi)])
    s = propagate(AgentState([0, 0], v0), u, t, drag)
    assert s.speed < cap


def test_position_and_velocity_arrays_match_scalar():
    x = AgentState([1, 2], [0.5, -1])
    ts = np.linspace(0, 4, 9)
    pos = position_at(x, [1, 1], ts, 0.5)
    vel = velocity_at(x, [1, 1], ts, 0.5)
    for k, t in enumerate(ts):
        s = propagate(x, [1, 1], float(t), 0.5)
        assert np.allclose(pos[k], s.position, atol=1e-13)
        assert np.allclose(vel[k], s.velocity, atol=1e-13)


def test_params_defaults_and_margin():
    pa, pd = attacker_params(), defender_params()
    assert pa.speed_cap == 6.0 and pd.speed_cap == pytest.approx(6.8)
    assert pa.effective_bound == 3.0
    assert pd.margin == pytest.approx(3.4e-3)
    assert 0 < pd.accel_bound - pd.effective_bound < 1e-2
    with pytest.raises(ValueError):
        AgentParams(0.0)
    with pytest.raises(ValueError):
        AgentParams(1.0, role="pilot")


def test_world_params_validation():
    w = WorldParams()
    assert (w.protected_radius, w.capture_radius, w.collision_radius) == (2.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        WorldParams(collision_radius=0.0)
