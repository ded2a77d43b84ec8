"""Minimum-time transfer of a damped double integrator to a point.

The optimal input has constant direction and full magnitude, so the
problem reduces to a scalar equation in the arrival time ``t``::

    |p(t)| = E2(t) * u_max,   p(t) = (r0 - target) + E1(t) v0 (+ E2(t) drift)

and the heading is the direction of ``-p(t_f)``. ``drift`` lets the same
root finder handle relative (defender-minus-attacker) motion where the
attacker's known constant input enters the offset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import AgentState, growth_factors, growth_factors_array

BISECTION_TOL = 1e-12
SCAN_POINTS = 100
MAX_DOUBLINGS = 60
ROOT_RESOLUTION = 1e-9
ROOT_SEARCH_BUDGET = 2000


class NoRootError(RuntimeError):
    """The reach equation has no root (the pursuer is not faster)."""


@dataclass(frozen=True)
class MinTimeSolution:
    heading: float
    terminal_time: float
    residual: float
    degenerate: bool = False

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.heading), math.sin(self.heading)])


def _gap(t, ox, oy, rx, ry, dx, dy, bound, drag):
    e1, e2 = growth_factors(t, drag)
    px = ox + e1 * rx + e2 * dx
    py = oy + e1 * ry + e2 * dy
    return e2 * bound - math.hypot(px, py)


def _first_root_in(a: float, b: float, ga: float, gb: float, args, resolution: float, budget: int):
    """Leftmost cell of ``[a, b]`` with ``gap(lo) <= 0 < gap(hi)`` at ``resolution``, or None.

    Cells without a sign change are discarded once the Lipschitz bound
    rules out a root or they shrink below ``resolution``. Returns the
    number of gap evaluations spent as the second item.
    """
    _, _, rx, ry, dx, dy, bound, drag = args
    rate_norm, drift_norm = math.hypot(rx, ry), math.hypot(dx, dy)
    stack = [(a, b, ga, gb)]
    spent = 0
    while stack and spent < budget:
        a, b, ga, gb = stack.pop()
        crossing = gb > 0
        if b - a <= resolution:
            if crossing:
                return (a, b), spent
            continue
        if not crossing:
            slope = growth_factors(b, drag)[0] * (bound + drift_norm) + math.exp(-drag * a) * rate_norm
            if 0.5 * (ga + gb) + 0.5 * slope * (b - a) < 0:
                continue
        m = 0.5 * (a + b)
        gm = _gap(m, *args)
        spent += 1
        # left half on top so the earliest root wins
        stack.append((m, b, gm, gb))
        stack.append((a, m, ga, gm))
    return None, spent


def solve_reach(offset, rate, drift, bound: float, drag: float, *, tol: float = BISECTION_TOL) -> MinTimeSolution:
    """Smallest ``t >= 0`` with ``|offset + E1 rate + E2 drift| = E2 bound``.

    Raises :class:`NoRootError` when no bracket is found, which happens only
    if ``bound <= |drift|`` and the offset keeps escaping.
    """
    if not (bound > 0 and drag > 0):
        raise ValueError("bound and drag must be positive")
    ox, oy = float(offset[0]), float(offset[1])
    rx, ry = float(rate[0]), float(rate[1])
    dx, dy = float(drift[0]), float(drift[1])
    vals = (ox, oy, rx, ry, dx, dy)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("non-finite input to the reach solver")
    scale = math.hypot(ox, oy)
    if scale == 0.0:
        return MinTimeSolution(0.0, 0.0, 0.0)

    args = (ox, oy, rx, ry, dx, dy, bound, drag)
    upper = 1.0
    for _ in range(MAX_DOUBLINGS):
        if _gap(upper, *args) > 0:
            break
        upper *= 2.0
    else:
        raise NoRootError(f"no arrival within {upper:.3g} s; pursuer too slow")

    # Scan for the first sign change so the smallest root is returned.
    grid = np.linspace(0.0, upper, SCAN_POINTS + 1)
    e1, e2 = growth_factors_array(grid, drag)
    gaps = e2 * bound - np.hypot(ox + e1 * rx + e2 * dx, oy + e1 * ry + e2 * dy)
    rate_norm, drift_norm = math.hypot(rx, ry), math.hypot(dx, dy)
    # on [a, b] the gap moves at most E1(b)(bound + |drift|) + exp(-C a)|rate| per second,
    # so a cell whose samples stay below that margin cannot hold a root
    slope = e1[1:] * (bound + drift_norm) + np.exp(-drag * grid[:-1]) * rate_norm
    peak = 0.5 * (gaps[:-1] + gaps[1:]) + 0.5 * slope * (grid[1:] - grid[:-1])
    lo = hi = None
    budget = ROOT_SEARCH_BUDGET
    for k in np.flatnonzero((peak >= 0) | (gaps[1:] > 0)):
        if budget <= 0:
            break
        found, spent = _first_root_in(
            float(grid[k]), float(grid[k + 1]), float(gaps[k]), float(gaps[k + 1]), args, ROOT_RESOLUTION, budget
        )
        budget -= spent
        if found is not None:
            lo, hi = found
            break
    if lo is None:
        # budget exhausted on near-tangent cells: fall back to the first sampled sign change
        k = int(np.argmax(gaps > 0))
        lo, hi = float(grid[k - 1]), float(grid[k])
    g_lo = _gap(lo, *args)
    while hi - lo > max(tol, 4 * math.ulp(hi)):
        mid = 0.5 * (lo + hi)
        g_mid = _gap(mid, *args)
        if g_mid > 0:
            hi = mid
        else:
            lo, g_lo = mid, g_mid
    t_f = hi if abs(_gap(hi, *args)) <= abs(g_lo) else lo

    e1f, e2f = growth_factors(t_f, drag)
    px = ox + e1f * rx + e2f * dx
    py = oy + e1f * ry + e2f * dy
    norm_p = math.hypot(px, py)
    if norm_p == 0.0:
        return MinTimeSolution(0.0, t_f, 0.0, degenerate=True)
    heading = math.atan2(-py, -px)
    residual = math.hypot(px + e2f * bound * math.cos(heading), py + e2f * bound * math.sin(heading))
    return MinTimeSolution(heading, t_f, residual)


def solve_min_time(start: AgentState, target, accel_bound: float, drag: float, *, tol: float = BISECTION_TOL) -> MinTimeSolution:
    """Time-optimal constant-heading transfer of ``start`` to ``target``."""
    target = np.asarray(target, dtype=float)
    return solve_reach(start.position - target, start.velocity, (0.0, 0.0), accel_bound, drag, tol=tol)


def residual_tolerance(initial_distance: float) -> float:
    return max(1e-9 * initial_distance, 1e-12)
