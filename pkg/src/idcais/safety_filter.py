"""Exponential-CBF safety filter for inter-defender separation.

For every defender pair the barrier ``h = rho_col^2 - |r_j - r_j'|^2`` must
stay nonpositive. The filter finds the smallest joint correction ``du`` to
the nominal controls subject to one linear ECBF row per pair and one ball
``|u_j* + du_j| <= u_max`` per defender, solved by a log-barrier interior
point method.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dynamics import AgentParams, AgentState

log = logging.getLogger(__name__)

GAP_TOL = 1e-10
MU = 10.0
PENALTY = 1e6
KKT_TOL = 1e-8


class QCQPError(RuntimeError):
    """The interior-point solver failed to converge."""


@dataclass(frozen=True)
class BarrierState:
    h: float
    h_dot: float
    psi: float
    pair: tuple[int, int] = (0, 1)


@dataclass
class FilterResult:
    """Joint correction and its certificate.

    Multipliers are normalised for the objective ``|du|^2 / 2``, so
    ``du + A' row_multipliers + sum_k 2 ball_multipliers[k] (u*_k + du_k) = 0``.
    """

    corrections: np.ndarray  # (N_d, 2)
    active_pairs: list[tuple[int, int]]
    kkt_residual: float
    relaxed: bool = False
    binding_pairs: list[tuple[int, int]] = field(default_factory=list)
    row_multipliers: np.ndarray | None = None
    ball_multipliers: np.ndarray | None = None
    assumption3_violated: bool = False
    rows: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)


def barrier_state(x_j: AgentState, x_k: AgentState, gain: float, collision_radius: float, pair=(0, 1)) -> BarrierState:
    dr = x_j.position - x_k.position
    dv = x_j.velocity - x_k.velocity
    h = collision_radius**2 - float(dr @ dr)
    h_dot = -2.0 * float(dr @ dv)
    return BarrierState(h, h_dot, h_dot + gain * h, tuple(pair))


def min_gain(params_d: AgentParams, collision_radius: float) -> tuple[float, float, float]:
    """Braking distance, safe initial separation and the smallest admissible gain."""
    u_bar, drag = params_d.accel_bound, params_d.drag
    braking = u_bar * (1.0 - math.log(2.0)) / drag**2
    rho0 = 2.0 * braking + collision_radius
    k_min = 4.0 * params_d.speed_cap * rho0 / (rho0**2 - collision_radius**2)
    return braking, rho0, k_min


def ecbf_rows(
    states: Sequence[AgentState],
    nominal: np.ndarray,
    gains: Mapping[tuple[int, int], float] | float,
    collision_radius: float,
    drag: float,
) -> tuple[np.ndarray, np.ndarray, list[tuple[int, int]]]:
    """ECBF constraint rows ``A du <= b``, one per pair ``j < k``."""
    n = len(states)
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    A = np.zeros((len(pairs), 2 * n))
    b = np.zeros(len(pairs))
    for row, (j, k) in enumerate(pairs):
        gain = gains if isinstance(gains, (int, float)) else gains[(j, k)]
        dr = states[j].position - states[k].position
        dv = states[j].velocity - states[k].velocity
        h = collision_radius**2 - float(dr @ dr)
        h_dot = -2.0 * float(dr @ dv)
        drift = nominal[j] - drag * states[j].velocity - nominal[k] + drag * states[k].velocity
        A[row, 2 * j:2 * j + 2] = -2.0 * dr
        A[row, 2 * k:2 * k + 2] = 2.0 * dr
        b[row] = -2.0 * gain * h_dot - gain**2 * h + 2.0 * (float(dv @ dv) + float(dr @ drift))
    return A, b, pairs


def filter_controls(
    states: Sequence[AgentState],
    nominal,
    params_d: AgentParams,
    collision_radius: float,
    gain: float | None = None,
    pair_gains: Mapping[tuple[int, int], float] | None = None,
    *,
    check_margin: bool = True,
) -> FilterResult:
    """Minimal correction of the joint defender control."""
    nominal = np.asarray(nominal, dtype=float).reshape(len(states), 2)
    n = len(states)
    u_bar = params_d.accel_bound
    if check_margin:
        limit = u_bar - 0.5 * params_d.margin
        norms = np.hypot(nominal[:, 0], nominal[:, 1])
        if np.any(norms > limit + 1e-12):
            raise ValueError(f"nominal control magnitude {norms.max():.6g} exceeds {limit:.6g}")
    if gain is None:
        gain = min_gain(params_d, collision_radius)[2]
    gains: Mapping[tuple[int, int], float] | float = gain
    if pair_gains:
        gains = {(j, k): pair_gains.get((j, k), gain) for j in range(n) for k in range(j + 1, n)}
    A, b, pairs = ecbf_rows(states, nominal, gains, collision_radius, params_d.drag)
    violated = [pairs[r] for r in range(len(pairs)) if b[r] < 0]
    assumption3 = len(violated) >= 2 * n
    if assumption3:
        log.info("%d ECBF rows active at the nominal control (>= 2 N_d)", len(violated))
    if not violated:
        return FilterResult(np.zeros((n, 2)), [], 0.0, rows=(A, b),
                            row_multipliers=np.zeros(len(pairs)), ball_multipliers=np.zeros(n))

    balls = Balls(np.arange(2 * n).reshape(n, 2), -nominal, np.full(n, u_bar))
    try:
        sol = solve_filter_qcqp(A, b, balls)
    except QCQPError:
        log.warning("interior point failed; falling back to alternating projections")
        x = dykstra_projection(A, b, balls)
        lin, quad = constraint_values(x, A, b, balls)
        sol = _Solution(x, np.zeros(len(b)), np.zeros(n), float(max(lin.max(), quad.max(), 0.0)), False)
    du = sol.x.reshape(n, 2)
    slack_rows = A @ sol.x - b
    binding = [pairs[r] for r in range(len(pairs)) if slack_rows[r] > -1e-7]
    return FilterResult(
        du,
        violated,
        sol.kkt_residual,
        sol.relaxed,
        binding,
        0.5 * sol.row_multipliers,
        0.5 * sol.ball_multipliers,
        assumption3,
        rows=(A, b),
    )


@dataclass(frozen=True)
class Balls:
    """Constraints ``|z[index[k]] - center[k]|^2 <= radius[k]^2`` on coordinate pairs."""

    index: np.ndarray  # (K, 2) int
    center: np.ndarray  # (K, 2)
    radius: np.ndarray  # (K,)

    def __len__(self) -> int:
        return len(self.radius)


@dataclass
class _Solution:
    x: np.ndarray
    row_multipliers: np.ndarray
    ball_multipliers: np.ndarray
    kkt_residual: float
    relaxed: bool


def constraint_values(z, G, h, balls: Balls):
    d = z[balls.index] - balls.center
    return G @ z - h, np.einsum("ij,ij->i", d, d) - balls.radius**2


def barrier_method(P, q, G, h, balls: Balls, z0, *, gap_tol: float = GAP_TOL, t0: float = 1.0, stop=None):
    """Minimise ``z'Pz/2 + q'z`` over ``Gz <= h`` and ``balls`` from a strictly feasible ``z0``.

    Log-barrier path following. Each centering uses damped Newton steps
    ``1 / (1 + lambda)`` (``lambda`` the Newton decrement), which keep the
    self-concordant barrier feasible and decreasing without evaluating it.
    ``t`` grows by ``MU`` until ``m / t`` drops below ``gap_tol`` or
    ``stop(z)`` holds. Returns ``(z, t)``.
    """
    z = np.asarray(z0, dtype=float).copy()
    m = len(h) + len(balls)
    rows = balls.index[:, [0, 0, 1, 1]]
    cols = balls.index[:, [0, 1, 0, 1]]
    t = t0
    while True:
        previous = math.inf
        for _ in range(60):
            lin, quad = constraint_values(z, G, h, balls)
            inv_lin = -1.0 / lin
            inv_quad = -1.0 / quad
            d = z[balls.index] - balls.center
            grad = t * (P @ z + q) + G.T @ inv_lin
            np.add.at(grad, balls.index, 2.0 * d * inv_quad[:, None])
            hess = t * P + (G.T * inv_lin**2) @ G
            outer = 4.0 * (inv_quad**2)[:, None] * (d[:, [0, 0, 1, 1]] * d[:, [0, 1, 0, 1]])
            outer[:, [0, 3]] += 2.0 * inv_quad[:, None]
            np.add.at(hess, (rows, cols), outer)
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                # tight rows at large t swamp the objective curvature
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            if not np.all(np.isfinite(step)):
                raise QCQPError("singular Newton system")
            dec = math.sqrt(max(-float(grad @ step), 0.0))
            # converged, or full steps no longer shrink the decrement
            # (rounding floor at large t)
            if dec < 1e-6 or (dec < 1e-2 and dec > 0.5 * previous):
                break
            previous = dec
            alpha = 1.0 if dec < 0.25 else 1.0 / (1.0 + dec)
            while True:
                cand = z + alpha * step
                lin_c, quad_c = constraint_values(cand, G, h, balls)
                if np.all(lin_c < 0) and np.all(quad_c < 0):
                    break
                # only reachable through rounding near the boundary
                alpha *= 0.5
                if alpha < 1e-14:
                    raise QCQPError("Newton step cannot stay strictly feasible")
            z = cand
            if stop is not None and stop(z):
                return z, t
        if m / t <= gap_tol:
            return z, t
        t *= MU


def polish(P, q, G, h, balls: Balls, z, t, *, iterations: int = 30):
    """Newton on the KKT equations of the constraints the barrier left tight.

    Constraints whose slack is below ``sqrt(1/t)`` (equivalently, whose
    central-path multiplier exceeds it) form the active set. Returns
    ``(z, linear_multipliers, ball_multipliers)`` or ``None`` when that set
    proves inconsistent (negative multiplier or a violated constraint).
    """
    lin, quad = constraint_values(z, G, h, balls)
    cut = math.sqrt(1.0 / t)
    act_lin = np.flatnonzero(-lin < cut)
    act_quad = np.flatnonzero(-quad < cut)
    n_lin, n_act = len(act_lin), len(act_lin) + len(act_quad)
    dim = len(z)
    mu = np.concatenate([1.0 / (t * -lin[act_lin]), 1.0 / (t * -quad[act_quad])])
    for _ in range(iterations):
        grads = np.zeros((n_act, dim))
        vals = np.zeros(n_act)
        grads[:n_lin] = G[act_lin]
        vals[:n_lin] = G[act_lin] @ z - h[act_lin]
        hess = P.astype(float).copy()
        for row, k in enumerate(act_quad, start=n_lin):
            ix = balls.index[k]
            d = z[ix] - balls.center[k]
            grads[row, ix] = 2.0 * d
            vals[row] = float(d @ d) - balls.radius[k] ** 2
            hess[np.ix_(ix, ix)] += 2.0 * mu[row] * np.eye(2)
        rhs = -np.concatenate([P @ z + q + grads.T @ mu, vals])
        if np.max(np.abs(rhs), initial=0.0) < 1e-15:
            break
        kkt = np.block([[hess, grads.T], [grads, np.zeros((n_act, n_act))]])
        delta = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        z = z + delta[:dim]
        mu = mu + delta[dim:]
    if np.any(mu < -1e-12):
        return None
    lin_p, quad_p = constraint_values(z, G, h, balls)
    if np.any(lin_p > 1e-12) or np.any(quad_p > 1e-12):
        return None
    lam_lin = np.zeros(len(h))
    lam_lin[act_lin] = np.maximum(mu[:n_lin], 0.0)
    lam_quad = np.zeros(len(balls))
    lam_quad[act_quad] = np.maximum(mu[n_lin:], 0.0)
    return z, lam_lin, lam_quad


def phase_one(A, b, balls: Balls):
    """A point strictly inside every row and ball, or ``None`` if the rows look jointly infeasible.

    Minimises a shared row slack ``s`` (``A x - b <= s``) and stops as soon
    as ``s`` turns negative.
    """
    dim = A.shape[1]
    m = len(b)
    P = np.zeros((dim + 1, dim + 1))
    q = np.zeros(dim + 1)
    q[-1] = 1.0
    G = np.hstack([A, -np.ones((m, 1))])
    # keep s bounded below so the lifted problem has a minimiser
    floor = np.zeros(dim + 1)
    floor[-1] = -1.0
    G = np.vstack([G, floor])
    h = np.concatenate([b, [1.0]])
    z0 = np.concatenate([np.zeros(dim), [float(np.max(-b)) + 1.0]])
    z, _ = barrier_method(P, q, G, h, balls, z0, gap_tol=1e-12, stop=lambda z: z[-1] < -1e-9)
    if z[-1] < 0:
        return z[:dim]
    return None


def solve_filter_qcqp(A, b, balls: Balls) -> _Solution:
    """``min |x|^2`` s.t. ``A x <= b`` and ``balls``; falls back to the slack-relaxed form when infeasible."""
    x0 = phase_one(A, b, balls)
    if x0 is None:
        return solve_relaxed(A, b, balls)
    dim = A.shape[1]
    P = 2.0 * np.eye(dim)
    q = np.zeros(dim)
    z, t = barrier_method(P, q, A, b, balls, x0)
    lin, quad = constraint_values(z, A, b, balls)
    lam, lam_balls = 1.0 / (t * -lin), 1.0 / (t * -quad)
    polished = polish(P, q, A, b, balls, z, t)
    if polished is not None:
        z, lam, lam_balls = polished
    residual = kkt_residual(z, A, b, balls, lam, lam_balls)
    if residual > 1e-6:
        raise QCQPError(f"KKT residual {residual:.3g} too large")
    return _Solution(z, lam, lam_balls, residual, False)


def solve_relaxed(A, b, balls: Balls, *, penalty: float = PENALTY) -> _Solution:
    """``min |x|^2 + penalty * sum s`` s.t. ``A x - b <= s``, ``s >= 0`` and ``balls``.

    The residual reported is the KKT residual of this relaxed problem.
    """
    dim = A.shape[1]
    m = len(b)
    P = np.zeros((dim + m, dim + m))
    P[:dim, :dim] = 2.0 * np.eye(dim)
    q = np.concatenate([np.zeros(dim), np.full(m, penalty)])
    G = np.block([[A, -np.eye(m)], [np.zeros((m, dim)), -np.eye(m)]])
    h = np.concatenate([b, np.zeros(m)])
    z0 = np.concatenate([np.zeros(dim), np.maximum(0.0, -b) + 1.0])
    # the path parameter multiplies an objective of order ``penalty``
    z, t = barrier_method(P, q, G, h, balls, z0, t0=1.0 / penalty, gap_tol=GAP_TOL * penalty)
    lin, quad = constraint_values(z, G, h, balls)
    lam, lam_balls = 1.0 / (t * -lin), 1.0 / (t * -quad)
    polished = polish(P, q, G, h, balls, z, t)
    if polished is not None:
        z, lam, lam_balls = polished
    grad = P @ z + q + G.T @ lam
    d = z[balls.index] - balls.center
    for k in range(len(balls)):
        grad[balls.index[k]] += 2.0 * lam_balls[k] * d[k]
    lin, quad = constraint_values(z, G, h, balls)
    residual = max(
        float(np.max(np.abs(grad))),
        float(np.max(np.abs(lam * lin))),
        float(np.max(np.abs(lam_balls * quad), initial=0.0)),
        float(np.max(np.maximum(lin, 0.0))),
        float(np.max(np.maximum(quad, 0.0), initial=0.0)),
    )
    return _Solution(z[:dim], lam[:m], lam_balls, residual, True)


def kkt_residual(x, A, b, balls: Balls, lam_rows, lam_balls) -> float:
    """Largest violation among stationarity, feasibility, dual feasibility and complementarity."""
    lin, quad = constraint_values(x, A, b, balls)
    grad = 2.0 * x + A.T @ lam_rows
    d = x[balls.index] - balls.center
    for k in range(len(balls)):
        grad[balls.index[k]] += 2.0 * lam_balls[k] * d[k]
    parts = [
        float(np.max(np.abs(grad))),
        float(np.max(np.maximum(lin, 0.0), initial=0.0)),
        float(np.max(np.maximum(quad, 0.0), initial=0.0)),
        float(np.max(np.maximum(-lam_rows, 0.0), initial=0.0)),
        float(np.max(np.maximum(-lam_balls, 0.0), initial=0.0)),
        float(np.max(np.abs(lam_rows * lin), initial=0.0)),
        float(np.max(np.abs(lam_balls * quad), initial=0.0)),
    ]
    return max(parts)


def dykstra_projection(A, b, balls: Balls, *, iterations: int = 20000, tol: float = 1e-13) -> np.ndarray:
    """Project the origin onto ``{A x <= b}`` intersected with ``balls`` (Dykstra).

    Independent of the interior-point path; used as a fallback and a validator.
    """
    dim = A.shape[1]
    n_sets = len(b) + len(balls)
    x = np.zeros(dim)
    increments = np.zeros((n_sets, dim))
    norms = np.einsum("ij,ij->i", A, A)
    for _ in range(iterations):
        x_prev = x.copy()
        for k in range(n_sets):
            y = x + increments[k]
            proj = y.copy()
            if k < len(b):
                viol = float(A[k] @ y) - b[k]
                if viol > 0 and norms[k] > 0:
                    proj -= (viol / norms[k]) * A[k]
            else:
                kb = k - len(b)
                ix = balls.index[kb]
                d = y[ix] - balls.center[kb]
                dist = math.hypot(d[0], d[1])
                if dist > balls.radius[kb]:
                    proj[ix] = balls.center[kb] + d * (balls.radius[kb] / dist)
            increments[k] = y - proj
            x = proj
        if np.max(np.abs(x - x_prev)) < tol:
            break
    return x
