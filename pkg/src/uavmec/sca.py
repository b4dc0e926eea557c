"""Successive convex approximation for the joint trajectory/resource step.

The per-slot problem is non-convex through the propulsion power curve and the
rate's dependence on the UAV position.  Both are handled by tight convex
surrogates at a linearization point: the rate gets a concave quadratic lower
bound, the induced-power root a slack variable whose defining inequality is
linearized, and the offloaded-bit square a tangent lower bound.  Each outer
iteration solves the resulting convex program and re-linearizes at its
solution until the objective stalls.

All functions here speak physical units (meters, bits, Hz); scaling into
solver units happens when the convex subproblem is assembled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import rate_with_gamma
from .lyapunov import SlotProblem, objective_value
from .solver import (FREQ_SCALE, POS_SCALE, JointStepSubproblem, SolverFailure,
                     SolverOptions, solve_step)
from .system import SlotDecision

__all__ = [
    "SurrogatePoint",
    "beta_coefficient",
    "rate_lower_bound",
    "induced_slack",
    "induced_slack_bound",
    "offload_sqrt_bits",
    "tangent_square_bound",
    "initial_point",
    "build_subproblem",
    "solve_joint_slot",
]

# lens thinner than this (in solver position units) pins the UAV position
_THIN_LENS = 1e-6


@dataclass
class SurrogatePoint:
    """Linearization point of one outer iteration."""

    p_l: np.ndarray        # candidate next UAV position [m]
    delta_l: np.ndarray    # offload durations [s], length K
    f_l: np.ndarray        # CPU frequencies [Hz], length K
    psi_l: np.ndarray      # sqrt of offloaded bits, length K
    y_l: float             # induced-power slack at p_l


def beta_coefficient(p_l, p_k, gamma, params) -> float:
    """Curvature coefficient of the rate lower bound; positive when gamma > 0."""
    z = float(np.sum((np.asarray(p_l, dtype=float) - np.asarray(p_k, dtype=float)) ** 2))
    base = params.h ** 2 + z
    return (params.W * math.log2(math.e) * gamma * params.iota
            / ((gamma + base ** params.iota) * base))


def rate_lower_bound(p, p_l, p_k, gamma, params) -> float:
    """Concave quadratic under-estimator of the rate, tangent at ``p_l``."""
    beta = beta_coefficient(p_l, p_k, gamma, params)
    r_l = rate_with_gamma(p_l, p_k, gamma, params)
    p = np.asarray(p, dtype=float)
    p_k = np.asarray(p_k, dtype=float)
    p_l = np.asarray(p_l, dtype=float)
    return r_l - beta * (float(np.sum((p - p_k) ** 2)) - float(np.sum((p_l - p_k) ** 2)))


def induced_slack(p_to, p_from, delta, c3) -> float:
    """Root of the induced-power term at speed ``|p_to - p_from| / delta``.

    Uses the algebraically equivalent form ``sqrt(c3 / (sqrt(c3 + v^4/4)
    + v^2/2))`` whose radicand never cancels.
    """
    v2 = float(np.sum((np.asarray(p_to, dtype=float) - np.asarray(p_from, dtype=float)) ** 2)) / delta ** 2
    return math.sqrt(c3 / (math.sqrt(c3 + 0.25 * v2 * v2) + 0.5 * v2))


def induced_slack_bound(p, y, point: SurrogatePoint, p_u, delta) -> float:
    """Affine under-estimator of ``y^2 + |p - p_u|^2 / delta^2`` at the point.

    First-order expansion around ``(p_l, y_l)``; tangent there and a global
    lower bound everywhere (the expanded function is jointly convex).
    """
    p = np.asarray(p, dtype=float)
    p_u = np.asarray(p_u, dtype=float)
    d_l = point.p_l - p_u
    return (point.y_l ** 2 + 2.0 * point.y_l * (y - point.y_l)
            - float(np.sum(d_l ** 2)) / delta ** 2
            + 2.0 / delta ** 2 * float(d_l @ (p - p_u)))


def offload_sqrt_bits(delta_k, rate) -> float:
    """Square root of the bits moved in ``delta_k`` seconds at ``rate``."""
    return math.sqrt(max(delta_k * rate, 0.0))


def tangent_square_bound(psi, psi_l):
    """Tangent lower bound of ``psi^2`` at ``psi_l``."""
    return psi_l ** 2 + 2.0 * psi_l * (psi - psi_l)


# ---------------------------------------------------------------------------
# feasible starting point
# ---------------------------------------------------------------------------


def _minimal_move(problem: SlotProblem) -> np.ndarray:
    """Hover if allowed, else the smallest step keeping the destination reachable."""
    p_u, p_F = problem.p_u, problem.config.p_F
    dist = float(np.linalg.norm(p_F - p_u))
    if dist <= problem.r_reach:
        return p_u.copy()
    need = dist - problem.r_reach
    if need > problem.r_speed + 1e-6:
        raise SolverFailure(f"slot {problem.n}: no feasible step exists")
    step = min(need, problem.r_speed)
    return p_u + step * (p_F - p_u) / dist


def initial_point(problem: SlotProblem) -> SurrogatePoint:
    """Feasible start: idle CPUs, equal offload split, minimal movement.

    The sqrt-bits entries are clamped so the implied offloads respect the
    backlog quota, keeping the whole point feasible for the reformulated
    constraints.
    """
    c = problem.config
    p0 = _minimal_move(problem)
    delta_l = np.full(c.K, c.delta / c.K)
    f_l = np.zeros(c.K)
    psi_l = np.empty(c.K)
    for k in range(c.K):
        bits = min(delta_l[k] * problem.rate_at(k, p0), problem.q_bits[k])
        psi_l[k] = math.sqrt(max(bits, 0.0))
    return SurrogatePoint(p_l=p0, delta_l=delta_l, f_l=f_l, psi_l=psi_l,
                          y_l=induced_slack(p0, problem.p_u, c.delta, c.C3))


def _fallback_point(problem: SlotProblem) -> SurrogatePoint:
    """Alternative start: rate-proportional offload split, half-max step toward goal."""
    c = problem.config
    p_u, p_F = problem.p_u, c.p_F
    dist = float(np.linalg.norm(p_F - p_u))
    if dist > 1e-12:
        step = min(0.5 * problem.r_speed, dist)
        p0 = p_u + step * (p_F - p_u) / dist
    else:
        p0 = p_u.copy()
    if float(np.linalg.norm(p_F - p0)) > problem.r_reach:
        p0 = _minimal_move(problem)
    rates = np.array([problem.rate_at(k, p0) for k in range(c.K)])
    weights = rates / max(float(np.sum(rates)), 1e-12)
    delta_l = c.delta * weights
    psi_l = np.sqrt(np.minimum(delta_l * rates, np.maximum(problem.q_bits, 0.0)))
    return SurrogatePoint(p_l=p0, delta_l=delta_l, f_l=np.zeros(c.K), psi_l=psi_l,
                          y_l=induced_slack(p0, problem.p_u, c.delta, c.C3))


# ---------------------------------------------------------------------------
# convex subproblem assembly (solver units)
# ---------------------------------------------------------------------------


def build_subproblem(problem: SlotProblem, point: SurrogatePoint) -> JointStepSubproblem:
    c = problem.config
    active = np.flatnonzero(problem.q_bits > 0.5)
    m = len(active)
    q_hat = c.s_q * problem.q_bits[active]
    a_loc = c.s_q * FREQ_SCALE * c.delta / c.C_k[active]
    psi_hat = math.sqrt(c.s_q) * point.psi_l[active]

    p_u_s = problem.p_u / POS_SCALE
    p_F_s = c.p_F / POS_SCALE
    r_speed = problem.r_speed / POS_SCALE
    r_reach = problem.r_reach / POS_SCALE

    dist = float(np.linalg.norm(p_F_s - p_u_s))
    has_pos = (r_speed + r_reach - dist) > _THIN_LENS and r_reach > _THIN_LENS
    p_fixed = None
    if not has_pos:
        if r_reach <= _THIN_LENS:
            p_fixed = c.p_F.copy()
        else:
            p_fixed = problem.p_u + problem.r_speed * (c.p_F - problem.p_u) / max(dist * POS_SCALE, 1e-12)

    has_y = has_pos and problem.Q_u > 0.0

    c0 = float(np.sum(q_hat * psi_hat ** 2))
    v2 = v3 = ycoef = 0.0
    if has_pos:
        c0 += problem.Q_u * c.delta * c.C1
        v2 = problem.Q_u * c.delta * c.C1 * 3.0 * POS_SCALE ** 2 / (c.v_tip ** 2 * c.delta ** 2)
        v3 = problem.Q_u * c.delta * c.C4 * POS_SCALE ** 3 / c.delta ** 3
        ycoef = problem.Q_u * c.delta * c.C2
        if not has_y:  # zero virtual backlog: propulsion carries no weight at all
            c0 -= problem.Q_u * c.delta * c.C1
            v2 = v3 = 0.0
            ycoef = 0.0
    else:
        c0 += problem.Q_u * problem.propulsion_energy(p_fixed)

    beta = np.zeros(m)
    c_rate = np.empty(m)
    p_ref = np.zeros((m, 2))
    anchor = point.p_l if has_pos else p_fixed
    for j, k in enumerate(active):
        params = problem.channel_params(k)
        r_true = rate_with_gamma(anchor, problem.p_k[k], problem.gamma[k], params)
        if has_pos:
            b_phys = beta_coefficient(point.p_l, problem.p_k[k], problem.gamma[k], params)
            beta[j] = c.s_q * b_phys * POS_SCALE ** 2
            p_ref[j] = problem.p_k[k] / POS_SCALE
            z = float(np.sum((point.p_l / POS_SCALE - p_ref[j]) ** 2))
            c_rate[j] = c.s_q * r_true + beta[j] * z
        else:
            c_rate[j] = c.s_q * r_true

    slack_a0 = slack_ay = 0.0
    slack_ap = np.zeros(2)
    y_lo, y_hi = 1e-3, 1e3
    if has_y:
        sc = POS_SCALE ** 2 / c.delta ** 2
        d_l = point.p_l / POS_SCALE - p_u_s
        slack_a0 = -point.y_l ** 2 - sc * float(np.sum(d_l ** 2))
        slack_ay = 2.0 * point.y_l
        slack_ap = 2.0 * sc * d_l
        v_m2 = c.v_m ** 2
        y_hi = 20.0 + 3.0 * (v_m2 + math.sqrt(c.C3) + point.y_l ** 2) / max(slack_ay, 1e-9)

    sub = JointStepSubproblem(
        m=m,
        c0=c0,
        f3=c.V * c.w_k[active] * c.gamma_c * FREQ_SCALE ** 3 * c.delta,
        f1=-q_hat * a_loc,
        d1=c.V * c.w_k[active] * c.P_k[active],
        s1=-2.0 * q_hat * psi_hat,
        v2=v2, v3=v3, ycoef=ycoef,
        f_max=c.f_max[active] / FREQ_SCALE,
        q=q_hat,
        a_loc=a_loc,
        delta_total=c.delta,
        delta_floor=c.delta_floor,
        beta=beta,
        c_rate=c_rate,
        p_ref=p_ref,
        has_pos=has_pos,
        p_u=p_u_s, p_F=p_F_s, r_speed=r_speed, r_reach=r_reach,
        has_y=has_y,
        c3=c.C3,
        slack_a0=slack_a0, slack_ay=slack_ay, slack_ap=slack_ap,
        y_lo=y_lo, y_hi=y_hi,
    )
    sub.active = active
    sub.p_fixed = p_fixed
    return sub


def _pack_point(sub: JointStepSubproblem, problem: SlotProblem, point: SurrogatePoint) -> np.ndarray:
    c = problem.config
    x = np.zeros(sub.nvar)
    act = sub.active
    x[sub.sf] = point.f_l[act] / FREQ_SCALE
    x[sub.sd] = np.maximum(point.delta_l[act], sub.delta_floor)
    x[sub.ss] = math.sqrt(c.s_q) * point.psi_l[act]
    if sub.has_pos:
        x[sub.sp] = point.p_l / POS_SCALE
    if sub.has_y:
        x[sub.iy] = point.y_l
    return x


def _decision_from(sub: JointStepSubproblem, problem: SlotProblem, x) -> SlotDecision:
    c = problem.config
    f = np.zeros(c.K)
    dlt = np.zeros(c.K)
    l_o = np.zeros(c.K)
    act = sub.active
    if len(act):
        f_act = np.maximum(x[sub.sf], 0.0) * FREQ_SCALE
        f_act[f_act * c.delta / c.C_k[act] < 1.0] = 0.0
        d_act = np.maximum(x[sub.sd], 0.0)
        bits = np.maximum(x[sub.ss], 0.0) ** 2 / c.s_q
        keep = bits >= 1.0
        bits[~keep] = 0.0
        d_act[~keep] = 0.0
        f[act] = f_act
        dlt[act] = d_act
        l_o[act] = bits
    p_next = x[sub.sp] * POS_SCALE if sub.has_pos else sub.p_fixed
    l_c = f * c.delta / c.C_k
    over = l_c + l_o - problem.q_bits
    fix = over > 0
    l_o[fix] = np.maximum(problem.q_bits[fix] - l_c[fix], 0.0)
    return SlotDecision(
        f_k=f, delta_k=dlt, p_next=np.asarray(p_next, dtype=float),
        l_c=l_c, l_o=l_o,
        E_c=c.gamma_c * f ** 3 * c.delta,
        E_o=dlt * c.P_k,
        E_uav=problem.propulsion_energy(p_next),
    )


def _refresh(problem: SlotProblem, decision: SlotDecision) -> SurrogatePoint:
    """Re-anchor the linearization at the latest solution."""
    c = problem.config
    psi = np.empty(c.K)
    residual = np.maximum(problem.q_bits - decision.l_c, 0.0)
    for k in range(c.K):
        bits = min(decision.delta_k[k] * problem.rate_at(k, decision.p_next), residual[k])
        psi[k] = math.sqrt(max(bits, 0.0))
    return SurrogatePoint(
        p_l=decision.p_next.copy(),
        delta_l=decision.delta_k.copy(),
        f_l=decision.f_k.copy(),
        psi_l=psi,
        y_l=induced_slack(decision.p_next, problem.p_u, c.delta, c.C3),
    )


def _zero_decision(problem: SlotProblem, p_next) -> SlotDecision:
    K = problem.config.K
    z = np.zeros(K)
    return SlotDecision(f_k=z.copy(), delta_k=z.copy(), p_next=np.asarray(p_next, dtype=float),
                        l_c=z.copy(), l_o=z.copy(), E_c=z.copy(), E_o=z.copy(),
                        E_uav=problem.propulsion_energy(p_next))


def _run_sca(problem: SlotProblem, point: SurrogatePoint, opts: SolverOptions):
    c = problem.config
    active_any = bool(np.any(problem.q_bits > 0.5))
    if not active_any and problem.Q_u <= 0.0:
        dec = _zero_decision(problem, point.p_l)
        dec.objective = objective_value(problem, dec, check=False)
        dec.sca_history = [dec.objective]
        return dec

    history = []
    best = None
    best_val = np.inf
    last = None
    iters = 0
    for _ in range(c.sca_max_iter):
        sub = build_subproblem(problem, point)
        if sub.nvar == 0:
            # no backlog and position pinned: nothing to optimize
            dec = _zero_decision(problem, sub.p_fixed)
            dec.objective = objective_value(problem, dec, check=False)
            dec.sca_history = history + [dec.objective]
            dec.sca_iters = iters
            return dec
        if iters == 0:
            history.append(sub.objective(_pack_point(sub, problem, point)))
        warm = _pack_point(sub, problem, point)
        report = solve_step(sub, warm_start=warm, options=opts)
        iters += 1
        decision = _decision_from(sub, problem, report.x)
        val = objective_value(problem, decision, check=False)
        history.append(report.objective)
        if val < best_val:
            best, best_val = decision, val
        last = decision
        if abs(history[-1] - history[-2]) < c.sca_eps:
            last.sca_iters = iters
            last.objective = val
            last.sca_history = history
            return last
        point = _refresh(problem, decision)
    best.sca_iters = iters
    best.objective = best_val
    best.sca_history = history
    return best


def solve_joint_slot(problem: SlotProblem, options: SolverOptions | None = None) -> SlotDecision:
    """Solve one slot's joint problem by SCA; retries once from a fallback start.

    Hovering is a stationary point of the propulsion curve, so an iteration
    anchored there gets no first-order credit for moving; when the virtual
    energy backlog is positive and the first pass barely moves, a second pass
    from the moving fallback anchor is taken and the better decision wins.
    The returned decision is feasible for the original per-slot constraints;
    ``sca_history`` records the winning pass's objective sequence, starting
    from the value at its feasible start.
    """
    opts = options or SolverOptions(gap=problem.config.barrier_gap)
    try:
        dec = _run_sca(problem, initial_point(problem), opts)
    except SolverFailure:
        return _run_sca(problem, _fallback_point(problem), opts)
    if problem.Q_u > 0:
        speed = float(np.linalg.norm(dec.p_next - problem.p_u)) / problem.config.delta
        if speed < 8.0:
            try:
                alt = _run_sca(problem, _fallback_point(problem), opts)
            except SolverFailure:
                alt = None
            if alt is not None and alt.objective < dec.objective:
                alt.sca_iters += dec.sca_iters
                dec = alt
    return dec
