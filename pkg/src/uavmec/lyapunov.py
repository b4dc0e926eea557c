"""Drift-plus-penalty machinery.

Each slot, the controller observes queue backlogs, fresh arrivals, and all
positions, and minimizes

    Q_u * E_uav  +  V * E_s  -  sum_k q_k * l_k

over CPU frequencies, offload durations, and the next UAV position, subject
to the per-slot resource and kinematic constraints.  ``Q_u`` is the scaled
virtual energy backlog, ``q_k`` the scaled post-arrival data backlog, and
``l_k`` the served bits in the same scale, so the three terms are comparable
at the default scenario's magnitudes.

``drift_bound_check`` re-verifies, slot by slot on a finished trace, the
deterministic quadratic inequalities that make this objective an upper bound
on the queue drift plus the weighted energy penalty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, rate_with_gamma, snr_coefficient
from .config import ScenarioConfig
from .system import SlotDecision, propulsion_power, drift_constant

__all__ = [
    "SlotProblem",
    "InfeasibleProblem",
    "ConstraintViolation",
    "build_slot_problem",
    "objective_value",
    "drift_bound_check",
]


class InfeasibleProblem(RuntimeError):
    """The slot's kinematic constraint set is empty: configuration bug."""


class ConstraintViolation(ValueError):
    """A decision violates a per-slot constraint beyond tolerance."""


@dataclass
class SlotProblem:
    """Deterministic single-slot problem: state snapshot plus constants."""

    config: ScenarioConfig
    n: int                  # 1-based slot index
    q_bits: np.ndarray      # post-arrival backlogs Q_k + A_k [bits]
    Q_u: float              # scaled virtual backlog
    p_u: np.ndarray         # current UAV position [m]
    p_k: np.ndarray         # user positions [m], shape (K, 2)
    gamma: np.ndarray       # frozen SNR coefficients, per user

    @property
    def r_speed(self) -> float:
        """Per-slot movement radius [m]."""
        return self.config.v_m * self.config.delta

    @property
    def r_reach(self) -> float:
        """Radius around the destination the UAV must stay within [m]."""
        return self.config.v_m * (self.config.N - self.n) * self.config.delta

    def channel_params(self, k: int) -> ChannelParams:
        c = self.config
        return ChannelParams(a=c.a, b=c.b, g0=c.g0, kappa=c.kappa,
                             iota_tilde=c.iota_tilde, h=c.h, W=c.W,
                             N0=c.N0, P_k=c.P_k[k])

    def rate_at(self, k: int, p) -> float:
        """Uplink rate of user k [bits/s] at candidate position ``p``."""
        return rate_with_gamma(p, self.p_k[k], self.gamma[k], self.channel_params(k))

    def propulsion_energy(self, p_next) -> float:
        c = self.config
        v = float(np.linalg.norm(np.asarray(p_next, dtype=float) - self.p_u)) / c.delta
        return c.delta * propulsion_power(v, c.C1, c.C2, c.C3, c.C4, c.v_tip)


def build_slot_problem(queues, arrivals, p_u, ue_positions, config, n) -> SlotProblem:
    """Assemble the slot-``n`` problem from observed state.

    Arrivals at the current slot are visible to the controller, so the
    backlog coefficients are ``Q_k + A_k``.  The SNR blending factor is
    frozen at the slot-start geometry.
    """
    if not (1 <= n <= config.N):
        raise ValueError(f"slot index {n} outside 1..{config.N}")
    p_u = np.asarray(p_u, dtype=float).reshape(2)
    ue_positions = np.asarray(ue_positions, dtype=float).reshape(config.K, 2)
    q_bits = np.asarray(queues.Q_k, dtype=float) + np.asarray(arrivals, dtype=float)

    r_reach = config.v_m * (config.N - n) * config.delta
    r_speed = config.v_m * config.delta
    gap = float(np.linalg.norm(config.p_F - p_u)) - (r_reach + r_speed)
    if gap > 1e-6:
        raise InfeasibleProblem(
            f"slot {n}: destination unreachable by {gap:.3g} m; state is corrupt")

    gamma = np.empty(config.K)
    prob = SlotProblem(config=config, n=n, q_bits=q_bits, Q_u=float(queues.Q_u),
                       p_u=p_u, p_k=ue_positions, gamma=gamma)
    for k in range(config.K):
        gamma[k] = snr_coefficient(p_u, ue_positions[k], prob.channel_params(k))
    return prob


def _check_decision(problem: SlotProblem, decision: SlotDecision):
    c = problem.config
    tol = c.feas_tol
    bit_tol = tol / c.s_q  # feasibility tolerance is stated in scaled units
    errs = []
    if np.any(decision.f_k < -tol * np.maximum(c.f_max, 1.0)):
        errs.append("f_k below 0")
    if np.any(decision.f_k > c.f_max * (1 + tol) + tol):
        errs.append("f_k above f_max")
    if np.any(decision.delta_k < -tol):
        errs.append("delta_k below 0")
    if float(np.sum(decision.delta_k)) > c.delta * (1 + tol):
        errs.append("offload durations exceed the slot")
    over = decision.l_k - problem.q_bits
    if np.any(over > bit_tol):
        errs.append(f"served bits exceed backlog by {float(np.max(over)):.3g}")
    step = float(np.linalg.norm(decision.p_next - problem.p_u))
    if step > problem.r_speed * (1 + tol) + 1e-9:
        errs.append(f"step {step:.6f} m exceeds speed limit {problem.r_speed:.6f} m")
    miss = float(np.linalg.norm(c.p_F - decision.p_next))
    if miss > problem.r_reach * (1 + tol) + 1e-6:
        errs.append(f"destination left unreachable by {miss - problem.r_reach:.3g} m")
    if errs:
        raise ConstraintViolation(f"slot {problem.n}: " + "; ".join(errs))


def objective_value(problem: SlotProblem, decision: SlotDecision, check=True) -> float:
    """Exact per-slot objective at a physical decision.

    Raises ConstraintViolation if the decision breaks a constraint beyond
    tolerance (disable with ``check=False`` for diagnostics).
    """
    if check:
        _check_decision(problem, decision)
    c = problem.config
    e_uav = problem.propulsion_energy(decision.p_next)
    e_s = float(np.sum(c.w_k * (decision.E_c + decision.E_o)))
    q_scaled = c.s_q * problem.q_bits
    l_scaled = c.s_q * decision.l_k
    return problem.Q_u * e_uav + c.V * e_s - float(np.sum(q_scaled * l_scaled))


def drift_bound_check(trace, config) -> dict:
    """Verify the per-slot quadratic queue inequalities on a finished trace.

    Checks, in scaled queue units, that each slot's squared-backlog growth is
    within the quadratic bound implied by the clamped queue updates, and that
    the summed form (including the finite constant) holds.  Report-only.
    """
    s_q, s_u = config.s_q, config.s_u
    N = trace.N
    # scaled queue trajectories including the post-horizon state
    Qk = s_q * np.vstack([trace.Q_bits, trace.final_Q_bits[None, :]])
    Qu = s_u * np.concatenate([trace.Q_u_joule, [trace.final_Q_u_joule]])
    A = s_q * trace.arrivals_bits
    serv = s_q * (trace.l_local_bits + trace.l_offload_bits)
    dE = s_u * (trace.E_uav - config.E_u)

    lhs20 = 0.5 * (Qu[1:] ** 2 - Qu[:-1] ** 2)
    rhs20 = 0.5 * dE ** 2 + Qu[:-1] * dE
    slack20 = rhs20 - lhs20

    lhs21 = 0.5 * (Qk[1:] ** 2 - Qk[:-1] ** 2)
    rhs21 = 0.5 * (A ** 2 + serv ** 2) + Qk[:-1] * A - Qk[:-1] * serv - A * serv
    slack21 = rhs21 - lhs21

    B = drift_constant(config)
    lyap = 0.5 * (Qu ** 2 + np.sum(Qk ** 2, axis=1))
    lhs_t = lyap[1:] - lyap[:-1]
    rhs_t = B + Qu[:-1] * dE + np.sum(Qk[:-1] * A - (Qk[:-1] + A) * serv, axis=1)
    slack_t = rhs_t - lhs_t

    def _summ(slack):
        scale = 1e-9 * np.maximum(1.0, np.abs(slack))
        viol = int(np.sum(slack < -scale))
        return viol, float(np.min(slack)), float(np.max(slack))

    v20, min20, max20 = _summ(slack20)
    v21, min21, max21 = _summ(slack21.ravel())
    vt, mint, maxt = _summ(slack_t)
    return {
        "slots": int(N),
        "violations": v20 + v21 + vt,
        "virtual_queue": {"violations": v20, "min_slack": min20, "max_slack": max20},
        "data_queues": {"violations": v21, "min_slack": min21, "max_slack": max21},
        "summed_bound": {"violations": vt, "min_slack": mint, "max_slack": maxt,
                         "constant": B},
    }
