"""Forecast inter-defender collisions along constant-heading plans.

A plan is a defender state plus the constant input it will hold. Each
plan's path is bounded by a triangle (cheap rejection test); only pairs
whose triangles come within the collision radius get the exact
time-of-collision search.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dynamics import AgentParams, AgentState, growth_factors, growth_factors_array
from .engagement import EngagementSolution

SCAN_STEP = 1e-2
REFINE_TOL = 1e-9
T_EPS = 1e-3
MAX_TURN = 0.5 * math.pi * 1.99
FALLBACK_SAMPLES = 32


@dataclass(frozen=True)
class Plan:
    """Constant input ``control`` held from ``state`` for ``duration`` seconds."""

    state: AgentState
    control: np.ndarray
    duration: float
    drag: float

    @classmethod
    def from_engagement(cls, x_d: AgentState, sol: EngagementSolution, params_d: AgentParams) -> "Plan":
        return cls(x_d, sol.defender_control(params_d), sol.defender_time, params_d.drag)

    def position(self, t):
        if np.ndim(t) == 0:
            e1, e2 = growth_factors(float(t), self.drag)
            return self.state.position + e1 * self.state.velocity + e2 * self.control
        e1, e2 = growth_factors_array(np.asarray(t, dtype=float), self.drag)
        return self.state.position + e1[:, None] * self.state.velocity + e2[:, None] * self.control

    def velocity(self, t: float) -> np.ndarray:
        e1, _ = growth_factors(t, self.drag)
        return math.exp(-self.drag * t) * self.state.velocity + e1 * self.control


@dataclass(frozen=True, eq=False)
class TrajectoryTriangle:
    vertices: np.ndarray  # (3, 2)
    degenerate: bool = False

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        """Vectorised membership test for an ``(n, 2)`` array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a, b, c = self.vertices
        if self.degenerate:
            return _segment_distance_many(pts, a, b, c) <= tol
        area = _cross(b - a, c - a)
        sign = 1.0 if area > 0 else -1.0
        inside = np.ones(len(pts), dtype=bool)
        for p, q in ((a, b), (b, c), (c, a)):
            edge = q - p
            length = math.hypot(edge[0], edge[1])
            rel = pts - p
            # signed distance to the edge's supporting line, positive inside
            dist = sign * (edge[0] * rel[:, 1] - edge[1] * rel[:, 0]) / length
            inside &= dist >= -tol
        return inside


def _cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _segment_distance_many(pts, a, b, c):
    # distance from points to the hull of collinear a, b, c
    dmin = np.full(len(pts), np.inf)
    for p, q in ((a, b), (b, c), (a, c)):
        d = q - p
        dd = float(d @ d)
        if dd == 0.0:
            dist = np.hypot(*(pts - p).T)
        else:
            s = np.clip(((pts - p) @ d) / dd, 0.0, 1.0)
            proj = p + s[:, None] * d
            dist = np.hypot(*(pts - proj).T)
        dmin = np.minimum(dmin, dist)
    return dmin


def bounding_triangle(start: AgentState, heading: float, t_f: float, accel: float, drag: float) -> TrajectoryTriangle:
    """Triangle containing the path of ``start`` under ``accel`` along ``heading`` on ``[0, t_f]``."""
    u = accel * np.array([math.cos(heading), math.sin(heading)])
    return triangle_for_plan(Plan(start, u, t_f, drag))


def triangle_for_plan(plan: Plan, t_end: float | None = None) -> TrajectoryTriangle:
    t_f = plan.duration if t_end is None else t_end
    verts, degenerate = _triangle_vertices(plan, t_f)
    return TrajectoryTriangle(np.array(verts, dtype=float), degenerate)


def _kinematics(plan: Plan, t: float) -> tuple[float, float, float, float]:
    e1, e2 = growth_factors(t, plan.drag)
    decay = math.exp(-plan.drag * t)
    (x0, y0), (vx, vy), (ux, uy) = plan.state.position, plan.state.velocity, plan.control
    return (
        float(x0 + e1 * vx + e2 * ux),
        float(y0 + e1 * vy + e2 * uy),
        float(decay * vx + e1 * ux),
        float(decay * vy + e1 * uy),
    )


def _triangle_vertices(plan: Plan, t_f: float):
    """Tangent triangle of the path on ``[0, t_f]`` as plain tuples, with its degenerate flag."""
    if t_f < 0:
        raise ValueError("t_f must be nonnegative")
    x0, y0 = (float(c) for c in plan.state.position)
    if t_f == 0.0:
        return ((x0, y0), (x0, y0), (x0, y0)), True
    vx0, vy0 = (float(c) for c in plan.state.velocity)
    ux, uy = (float(c) for c in plan.control)
    speed0 = math.hypot(vx0, vy0)
    umag = math.hypot(ux, uy)
    if speed0 == 0.0 or umag == 0.0 or abs(vx0 * uy - vy0 * ux) <= 1e-12 * speed0 * umag:
        tri = _line_hull(plan, t_f)
        return tuple(map(tuple, tri.vertices.tolist())), True
    xf, yf, vxf, vyf = _kinematics(plan, t_f)
    turn = abs(math.atan2(vx0 * vyf - vy0 * vxf, vx0 * vxf + vy0 * vyf))
    if turn < MAX_TURN:
        speedf = math.hypot(vxf, vyf)
        d0x, d0y = vx0 / speed0, vy0 / speed0
        dfx, dfy = vxf / speedf, vyf / speedf
        det = d0x * dfy - d0y * dfx
        if det != 0.0:
            rx, ry = xf - x0, yf - y0
            a = (rx * dfy - ry * dfx) / det
            b = (d0x * ry - d0y * rx) / det
            if a > 0 and b > 0:
                return ((x0, y0), (x0 + a * d0x, y0 + a * d0y), (xf, yf)), False
    tri = _fallback_triangle(plan, t_f)
    return tuple(map(tuple, tri.vertices.tolist())), False


def _line_hull(plan: Plan, t_f: float) -> TrajectoryTriangle:
    """Extreme points of a straight path (velocity parallel to input)."""
    u = plan.control
    v0 = plan.state.velocity
    axis = u if math.hypot(u[0], u[1]) > 0 else v0
    axis = axis / math.hypot(axis[0], axis[1])
    times = [0.0, t_f]
    along = float(v0 @ axis)
    umag = math.hypot(u[0], u[1])
    if along < 0 and umag > 0:
        # velocity reverses at t* where the speed along the axis hits zero
        t_star = math.log1p(-along * plan.drag / umag) / plan.drag
        if t_star < t_f:
            times.append(t_star)
    pts = np.array([plan.position(t) for t in times])
    s = (pts - plan.state.position) @ axis
    lo, hi = pts[int(np.argmin(s))], pts[int(np.argmax(s))]
    return TrajectoryTriangle(np.array([lo, hi, hi]), degenerate=True)


def _fallback_triangle(plan: Plan, t_f: float) -> TrajectoryTriangle:
    ts = np.linspace(0.0, t_f, FALLBACK_SAMPLES)
    pts = plan.position(ts)
    center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    e1_f, _ = growth_factors(t_f, plan.drag)
    max_speed = plan.state.speed + e1_f * math.hypot(*plan.control)
    pad = 0.5 * max_speed * (ts[1] - ts[0])
    radius = float(np.max(np.hypot(*(pts - center).T))) + pad
    angles = np.array([0.5 * math.pi, 0.5 * math.pi + 2 * math.pi / 3, 0.5 * math.pi + 4 * math.pi / 3])
    # equilateral triangle circumscribing the disc of this radius
    verts = center + 2.0 * radius * np.column_stack([np.cos(angles), np.sin(angles)])
    return TrajectoryTriangle(verts)


def _seg_seg_distance(p1, p2, q1, q2) -> float:
    if _segments_intersect(p1, p2, q1, q2):
        return 0.0
    return min(
        _point_seg_distance(p1, q1, q2),
        _point_seg_distance(p2, q1, q2),
        _point_seg_distance(q1, p1, p2),
        _point_seg_distance(q2, p1, p2),
    )


def _point_seg_distance(p, a, b) -> float:
    dx, dy = b[0] - a[0], b[1] - a[1]
    px, py = p[0] - a[0], p[1] - a[1]
    dd = dx * dx + dy * dy
    s = 0.0 if dd == 0.0 else min(1.0, max(0.0, (px * dx + py * dy) / dd))
    return math.hypot(px - s * dx, py - s * dy)


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    return ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4))


def _point_in_triangle(p, verts) -> bool:
    a, b, c = verts
    d1, d2, d3 = _orient(a, b, p), _orient(b, c, p), _orient(c, a, p)
    has_neg = d1 < 0 or d2 < 0 or d3 < 0
    has_pos = d1 > 0 or d2 > 0 or d3 > 0
    return not (has_neg and has_pos)


def triangle_distance(a: TrajectoryTriangle, b: TrajectoryTriangle) -> float:
    """Minimum Euclidean distance between two (possibly degenerate) triangles."""
    va = tuple(map(tuple, a.vertices.tolist()))
    vb = tuple(map(tuple, b.vertices.tolist()))
    return _vertex_distance(va, a.degenerate, vb, b.degenerate)


def _vertex_distance(va, deg_a: bool, vb, deg_b: bool, stop_below: float = 0.0) -> float:
    # ``stop_below``: return early once the distance is known to be below it
    if (not deg_b and any(_point_in_triangle(p, vb) for p in va)) or (
        not deg_a and any(_point_in_triangle(q, va) for q in vb)
    ):
        return 0.0
    best = math.inf
    for k in range(3):
        p1, p2 = va[k], va[(k + 1) % 3]
        for m in range(3):
            best = min(best, _seg_seg_distance(p1, p2, vb[m], vb[(m + 1) % 3]))
            if best <= stop_below:
                return best
    return best


def triangles_conflict(a: TrajectoryTriangle, b: TrajectoryTriangle, collision_radius: float) -> bool:
    """True iff the two triangles come strictly closer than ``collision_radius``."""
    va = tuple(map(tuple, a.vertices.tolist()))
    vb = tuple(map(tuple, b.vertices.tolist()))
    return _conflict(va, a.degenerate, vb, b.degenerate, collision_radius)


def _conflict(va, deg_a: bool, vb, deg_b: bool, rho: float) -> bool:
    # axis-aligned boxes first
    gx = max(0.0, min(p[0] for p in va) - max(q[0] for q in vb), min(q[0] for q in vb) - max(p[0] for p in va))
    gy = max(0.0, min(p[1] for p in va) - max(q[1] for q in vb), min(q[1] for q in vb) - max(p[1] for p in va))
    if gx * gx + gy * gy >= rho * rho:
        return False
    # edge normals as separating axes: a projected gap never exceeds the distance
    for verts in (va, vb):
        for k in range(3):
            (px, py), (qx, qy) = verts[k], verts[(k + 1) % 3]
            nx, ny = qy - py, px - qx
            norm = math.hypot(nx, ny)
            if norm == 0.0:
                continue
            nx /= norm
            ny /= norm
            pa = [x * nx + y * ny for x, y in va]
            pb = [x * nx + y * ny for x, y in vb]
            if max(min(pa) - max(pb), min(pb) - max(pa)) >= rho:
                return False
    return _vertex_distance(va, deg_a, vb, deg_b, stop_below=rho) < rho


def _batch_vertices(pos, vel, ctrl, t_f, drag: float, plans, fallback_plan_index):
    """Tangent triangles for many (plan, horizon) rows at once.

    Rows that need the straight-line hull or the sampled fallback are
    delegated to :func:`_triangle_vertices`.
    """
    e1, e2 = growth_factors_array(t_f, drag)
    decay = np.exp(-drag * t_f)
    end = pos + e1[:, None] * vel + e2[:, None] * ctrl
    vel_f = decay[:, None] * vel + e1[:, None] * ctrl
    speed0 = np.hypot(vel[:, 0], vel[:, 1])
    speedf = np.hypot(vel_f[:, 0], vel_f[:, 1])
    umag = np.hypot(ctrl[:, 0], ctrl[:, 1])
    cross_vu = vel[:, 0] * ctrl[:, 1] - vel[:, 1] * ctrl[:, 0]
    turn = np.abs(np.arctan2(
        vel[:, 0] * vel_f[:, 1] - vel[:, 1] * vel_f[:, 0],
        vel[:, 0] * vel_f[:, 0] + vel[:, 1] * vel_f[:, 1],
    ))
    with np.errstate(divide="ignore", invalid="ignore"):
        d0 = vel / speed0[:, None]
        df = vel_f / speedf[:, None]
        det = d0[:, 0] * df[:, 1] - d0[:, 1] * df[:, 0]
        rel = end - pos
        a = (rel[:, 0] * df[:, 1] - rel[:, 1] * df[:, 0]) / det
        b = (d0[:, 0] * rel[:, 1] - d0[:, 1] * rel[:, 0]) / det
    ok = (
        (t_f > 0) & (speed0 > 0) & (umag > 0) & (np.abs(cross_vu) > 1e-12 * speed0 * umag)
        & (turn < MAX_TURN) & (det != 0) & (a > 0) & (b > 0)
    )
    verts = np.empty((len(t_f), 3, 2))
    verts[:, 0] = pos
    verts[:, 1] = pos + np.where(ok, a, 0.0)[:, None] * np.where(ok[:, None], d0, 0.0)
    verts[:, 2] = end
    degenerate = np.zeros(len(t_f), dtype=bool)
    for row in np.flatnonzero(~ok):
        v, deg = _triangle_vertices(plans[fallback_plan_index[row]], float(t_f[row]))
        verts[row] = v
        degenerate[row] = deg
    return verts, degenerate


def _batch_conflict(va, deg_a, vb, deg_b, rho: float) -> np.ndarray:
    """Vectorised :func:`_conflict` over stacks of ``(n, 3, 2)`` vertices."""
    n = len(va)
    inside = np.zeros(n, dtype=bool)
    for pts, tri, deg in ((va, vb, deg_b), (vb, va, deg_a)):
        o = [
            _orient_many(tri[:, k], tri[:, (k + 1) % 3], pts)
            for k in range(3)
        ]  # each (n, 3): orientation of every point against edge k
        has_neg = (o[0] < 0) | (o[1] < 0) | (o[2] < 0)
        has_pos = (o[0] > 0) | (o[1] > 0) | (o[2] > 0)
        inside |= ~deg & np.any(~(has_neg & has_pos), axis=1)
    best = np.full(n, np.inf)
    for k in range(3):
        p1, p2 = va[:, k], va[:, (k + 1) % 3]
        for m in range(3):
            q1, q2 = vb[:, m], vb[:, (m + 1) % 3]
            d1 = _orient3(q1, q2, p1)
            d2 = _orient3(q1, q2, p2)
            d3 = _orient3(p1, p2, q1)
            d4 = _orient3(p1, p2, q2)
            cross = (((d1 > 0) & (d2 < 0)) | ((d1 < 0) & (d2 > 0))) & (
                ((d3 > 0) & (d4 < 0)) | ((d3 < 0) & (d4 > 0))
            )
            dist = np.minimum.reduce([
                _point_seg_many(p1, q1, q2), _point_seg_many(p2, q1, q2),
                _point_seg_many(q1, p1, p2), _point_seg_many(q2, p1, p2),
            ])
            best = np.minimum(best, np.where(cross, 0.0, dist))
    return inside | (best < rho)


def _orient3(a, b, c):
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def _orient_many(a, b, pts):
    # a, b: (n, 2); pts: (n, 3, 2)
    return (b[:, None, 0] - a[:, None, 0]) * (pts[..., 1] - a[:, None, 1]) - (
        b[:, None, 1] - a[:, None, 1]
    ) * (pts[..., 0] - a[:, None, 0])


def _point_seg_many(p, a, b):
    d = b - a
    rel = p - a
    dd = np.einsum("ij,ij->i", d, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(dd > 0, np.einsum("ij,ij->i", rel, d) / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    diff = rel - s[:, None] * d
    return np.hypot(diff[:, 0], diff[:, 1])


def _relative(plan_a: Plan, plan_b: Plan):
    if plan_a.drag != plan_b.drag:
        raise ValueError("plans must share one drag coefficient")
    dr = plan_a.state.position - plan_b.state.position
    dv = plan_a.state.velocity - plan_b.state.velocity
    du = plan_a.control - plan_b.control
    return dr, dv, du, plan_a.drag


def separation(plan_a: Plan, plan_b: Plan, t):
    """Distance between two plans at time(s) ``t`` (controls held past their duration)."""
    dr, dv, du, drag = _relative(plan_a, plan_b)
    if np.ndim(t) == 0:
        e1, e2 = growth_factors(float(t), drag)
        return math.hypot(*(dr + e1 * dv + e2 * du))
    e1, e2 = growth_factors_array(np.asarray(t, dtype=float), drag)
    rel = dr + e1[:, None] * dv + e2[:, None] * du
    return np.hypot(rel[:, 0], rel[:, 1])


def collision_time(
    plan_a: Plan,
    plan_b: Plan,
    collision_radius: float,
    horizon: float | None = None,
    *,
    step: float = SCAN_STEP,
    tol: float = REFINE_TOL,
) -> float | None:
    """Earliest ``t`` in ``[0, horizon]`` with separation ``<= collision_radius``.

    ``horizon`` defaults to the longer of the two plan durations. The
    separation is sampled every ``step`` seconds; cells that a Lipschitz
    bound cannot clear are subdivided left to right, so narrow dips
    between samples are found, and the first contact is refined to ``tol``.
    """
    if horizon is None:
        horizon = max(plan_a.duration, plan_b.duration)
    dr, dv, du, drag = _relative(plan_a, plan_b)
    r2 = collision_radius * collision_radius

    def d2(t: float) -> float:
        e1, e2 = growth_factors(t, drag)
        x = dr[0] + e1 * dv[0] + e2 * du[0]
        y = dr[1] + e1 * dv[1] + e2 * du[1]
        return x * x + y * y

    if d2(0.0) <= r2:
        return 0.0
    if horizon <= 0:
        return None
    n = max(1, int(math.ceil(horizon / step)))
    grid = np.linspace(0.0, horizon, n + 1)
    e1, e2 = growth_factors_array(grid, drag)
    rel_x = dr[0] + e1 * dv[0] + e2 * du[0]
    rel_y = dr[1] + e1 * dv[1] + e2 * du[1]
    dist = np.sqrt(rel_x * rel_x + rel_y * rel_y)
    # on [a, b] the separation changes at most exp(-C a)|dv| + E1(b)|du| per second,
    # so a cell whose samples clear the radius by that margin holds no contact
    dv_norm, du_norm = math.hypot(dv[0], dv[1]), math.hypot(du[0], du[1])
    slope = np.exp(-drag * grid[:-1]) * dv_norm + e1[1:] * du_norm
    low = 0.5 * (dist[:-1] + dist[1:]) - 0.5 * slope * np.diff(grid)
    for k in np.flatnonzero((low <= collision_radius) | (dist[1:] <= collision_radius)):
        hit = _first_contact(
            d2, r2, float(grid[k]), float(grid[k + 1]), float(dist[k]), float(dist[k + 1]),
            collision_radius, dv_norm, du_norm, drag, tol,
        )
        if hit is not None:
            return hit
    return None


def _first_contact(d2, r2, a, b, da, db, rho, dv_norm, du_norm, drag, tol, budget=4000):
    # leftmost sub-cell with a crossing, refined by bisection; cells the
    # Lipschitz bound clears are dropped, as are non-crossing cells below tol
    stack = [(a, b, da, db)]
    while stack and budget > 0:
        a, b, da, db = stack.pop()
        crossing = db <= rho
        if crossing and b - a <= tol:
            return b
        if not crossing:
            slope = math.exp(-drag * a) * dv_norm + growth_factors(b, drag)[0] * du_norm
            if 0.5 * (da + db) - 0.5 * slope * (b - a) > rho or b - a <= tol:
                continue
        m = 0.5 * (a + b)
        dm = math.sqrt(d2(m))
        budget -= 1
        stack.append((m, b, dm, db))
        stack.append((a, m, da, dm))
    if stack:
        # budget spent on near-tangent cells: refine the leftmost open crossing
        for a, b, da, db in reversed(stack):
            if db <= rho:
                return _bisect(d2, r2, a, b, tol)
    return None


def _bisect(d2, r2: float, lo: float, hi: float, tol: float) -> float:
    # invariant: d2(lo) > r2 >= d2(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if d2(mid) <= r2:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class ForecastTable:
    """Collision times keyed by ``(j, i, j2, i2)``: defender j chasing attacker i, etc."""

    times: dict[tuple[int, int, int, int], float] = field(default_factory=dict)
    clamped: set[tuple[int, int, int, int]] = field(default_factory=set)
    candidate_pairs: int = 0
    triangle_tests: int = 0
    collision_time_calls: int = 0
    wall_time: float = 0.0

    def get(self, j: int, i: int, j2: int, i2: int) -> float | None:
        return self.times.get((j, i, j2, i2))


def all_pairs_collision_times(
    plans: Mapping[tuple[int, int], Plan],
    collision_radius: float,
    *,
    t_eps: float = T_EPS,
    use_triangles: bool = True,
    step: float = SCAN_STEP,
) -> ForecastTable:
    """Collision-time table over every pair of plans with distinct defenders and attackers.

    ``plans[(j, i)]`` is defender j's plan against attacker i. With
    ``use_triangles`` the exact search runs only when the bounding
    triangles (over the pair's common horizon) conflict; otherwise every
    candidate pair is searched. Times below ``t_eps`` are clamped to it.
    """
    started = time.perf_counter()
    table = ForecastTable()
    keys = sorted(plans)
    pairs = [
        (ka, kb)
        for idx, ka in enumerate(keys)
        for kb in keys[idx + 1:]
        if ka[0] != kb[0] and ka[1] != kb[1]
    ]
    table.candidate_pairs = len(pairs)
    if use_triangles and pairs:
        table.triangle_tests = len(pairs)
        conflicting = _conflicting_pairs(plans, keys, pairs, collision_radius)
        pairs = [pair for pair, hit in zip(pairs, conflicting) if hit]
    for ka, kb in pairs:
        pa, pb = plans[ka], plans[kb]
        horizon = max(pa.duration, pb.duration)
        table.collision_time_calls += 1
        t_col = collision_time(pa, pb, collision_radius, horizon, step=step)
        if t_col is None:
            continue
        if t_col < t_eps:
            table.clamped.add(ka + kb)
            table.clamped.add(kb + ka)
            t_col = t_eps
        table.times[ka + kb] = t_col
        table.times[kb + ka] = t_col
    table.wall_time = time.perf_counter() - started
    return table


def _conflicting_pairs(plans, keys, pairs, rho: float) -> np.ndarray:
    # each plan is bounded over its pair's common horizon; the shorter one holds its input
    index = {key: n for n, key in enumerate(keys)}
    drags = {plans[key].drag for key in keys}
    if len(drags) != 1:
        raise ValueError("plans must share one drag coefficient")
    drag = drags.pop()
    plan_list = [plans[key] for key in keys]
    pos = np.array([p.state.position for p in plan_list], dtype=float)
    vel = np.array([p.state.velocity for p in plan_list], dtype=float)
    ctrl = np.array([p.control for p in plan_list], dtype=float)
    dur = np.array([p.duration for p in plan_list], dtype=float)
    ia = np.array([index[ka] for ka, _ in pairs])
    ib = np.array([index[kb] for _, kb in pairs])
    horizon = np.maximum(dur[ia], dur[ib])
    rows = np.concatenate([ia, ib])
    verts, deg = _batch_vertices(pos[rows], vel[rows], ctrl[rows], np.concatenate([horizon, horizon]), drag, plan_list, rows)
    m = len(pairs)
    return _batch_conflict(verts[:m], deg[:m], verts[m:], deg[m:], rho)
