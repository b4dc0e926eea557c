"""Benchmark policies: geometric-center tracking with two allocation rules.

Both baselines steer the UAV toward the geometric center of the users, at
full speed when the center is out of reach, while never letting the final
destination become unreachable (that constraint wins when the two conflict).
They differ only in resource allocation: "go" solves the fixed-position
allocation exactly, "ge" splits the slot equally among backlogged users and
lets each optimize its own term.
"""

from __future__ import annotations

import math

import numpy as np

from .lyapunov import SlotProblem
from .solver import solve_fixed_position
from .system import SlotDecision

__all__ = ["geometric_center", "pursuit_position", "go_step", "ge_step"]


def geometric_center(positions) -> np.ndarray:
    """Componentwise mean of a non-empty list of planar points."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("geometric center of an empty set")
    return pts.mean(axis=0)


def _closest_in_balls(target, c1, r1, c2, r2) -> np.ndarray:
    """Point closest to ``target`` inside the intersection of two discs.

    The intersection is assumed non-empty.  Cases: the target itself, the
    projection onto exactly one disc, or one of the two boundary-circle
    intersection points.
    """
    target = np.asarray(target, dtype=float)
    tol = 1e-12

    def inside(p, c, r):
        return float(np.linalg.norm(p - c)) <= r * (1 + 1e-12) + tol

    if inside(target, c1, r1) and inside(target, c2, r2):
        return target.copy()
    candidates = []
    for ca, ra, cb, rb in ((c1, r1, c2, r2), (c2, r2, c1, r1)):
        d = float(np.linalg.norm(target - ca))
        if d > ra:
            proj = ca + ra * (target - ca) / d
            if inside(proj, cb, rb):
                candidates.append(proj)
    if candidates:
        dists = [float(np.linalg.norm(p - target)) for p in candidates]
        return candidates[int(np.argmin(dists))]
    # both constraints active: intersection points of the two circles
    axis = c2 - c1
    D = float(np.linalg.norm(axis))
    if D < tol:
        # concentric: the smaller circle bounds; project onto it
        r = min(r1, r2)
        d = float(np.linalg.norm(target - c1))
        return c1 + r * (target - c1) / max(d, tol)
    # distance along the axis from c1 to the chord
    a = (D * D + r1 * r1 - r2 * r2) / (2.0 * D)
    h2 = r1 * r1 - a * a
    u = axis / D
    base = c1 + a * u
    if h2 <= tol:
        return base  # tangency: single feasible point
    h = math.sqrt(h2)
    perp = np.array([-u[1], u[0]])
    p1 = base + h * perp
    p2 = base - h * perp
    return p1 if np.linalg.norm(p1 - target) <= np.linalg.norm(p2 - target) else p2


def pursuit_position(problem: SlotProblem) -> np.ndarray:
    """Next position for center tracking under both kinematic constraints.

    Go straight to the center when possible, otherwise approach it at full
    speed; if that would leave the destination unreachable, take the closest
    admissible point instead.
    """
    center = geometric_center(problem.p_k)
    p_u = problem.p_u
    p_F = problem.config.p_F
    r_s, r_r = problem.r_speed, problem.r_reach
    if r_r <= 1e-12:
        return p_F.copy()
    gap = float(np.linalg.norm(center - p_u))
    if gap > r_s:
        step = p_u + r_s * (center - p_u) / gap
    else:
        step = center.copy()
    if float(np.linalg.norm(p_F - step)) <= r_r:
        return step
    return _closest_in_balls(center, p_u, r_s, p_F, r_r)


def go_step(problem: SlotProblem) -> SlotDecision:
    """Center tracking with exact fixed-position resource allocation."""
    return solve_fixed_position(problem, pursuit_position(problem))


def ge_step(problem: SlotProblem) -> SlotDecision:
    """Center tracking with equal offload time among backlogged users.

    Each backlogged user gets an equal share of the slot, transmits for as
    much of it as is both profitable and within its backlog, then picks the
    CPU frequency minimizing its own energy-minus-backlog term on the
    residual (offload first, then local).
    """
    c = problem.config
    p_next = pursuit_position(problem)
    K = c.K
    f = np.zeros(K)
    dlt = np.zeros(K)
    l_o = np.zeros(K)
    active = np.flatnonzero(problem.q_bits > 0.5)
    if active.size:
        share = c.delta / active.size
        for k in active:
            rate = problem.rate_at(k, p_next)
            q_hat = c.s_q * problem.q_bits[k]
            if q_hat * c.s_q * rate > c.V * c.w_k[k] * c.P_k[k] and rate > 0:
                bits = min(share * rate, problem.q_bits[k])
                if bits >= 1.0:
                    l_o[k] = bits
                    dlt[k] = bits / rate
            residual = problem.q_bits[k] - l_o[k]
            f_star = math.sqrt(c.s_q * q_hat / (3.0 * c.V * c.w_k[k] * c.gamma_c * c.C_k[k]))
            f_cap = residual * c.C_k[k] / c.delta
            f[k] = min(f_star, c.f_max[k], f_cap)
            if f[k] * c.delta / c.C_k[k] < 1.0:
                f[k] = 0.0
    l_c = f * c.delta / c.C_k
    return SlotDecision(
        f_k=f, delta_k=dlt, p_next=p_next,
        l_c=l_c, l_o=l_o,
        E_c=c.gamma_c * f ** 3 * c.delta,
        E_o=dlt * c.P_k,
        E_uav=problem.propulsion_energy(p_next),
    )
