"""Task execution physics and queue dynamics.

Local computing, offloading over TDMA sub-slots, the per-user task queue, the
virtual energy queue enforcing the UAV's average propulsion budget, and the
rotary-wing propulsion power curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "QueueState",
    "SlotDecision",
    "local_execution",
    "offload_execution",
    "update_task_queue",
    "update_virtual_queue",
    "propulsion_power",
    "drift_constant",
]


@dataclass
class QueueState:
    """Per-user data backlogs [bits] and the scaled virtual energy backlog."""

    Q_k: np.ndarray
    Q_u: float = 0.0


@dataclass
class SlotDecision:
    """One slot's control output plus derived physical quantities."""

    f_k: np.ndarray        # CPU frequencies [Hz]
    delta_k: np.ndarray    # offload durations [s]
    p_next: np.ndarray     # UAV position at slot end [m]
    l_c: np.ndarray        # locally executed bits
    l_o: np.ndarray        # offloaded bits
    E_c: np.ndarray        # local computing energy [J]
    E_o: np.ndarray        # offload energy [J]
    E_uav: float           # propulsion energy this slot [J]
    sca_iters: int = 0
    objective: float = 0.0
    sca_history: list = field(default_factory=list)

    @property
    def l_k(self) -> np.ndarray:
        return self.l_c + self.l_o

    @property
    def E_k(self) -> np.ndarray:
        return self.E_c + self.E_o


def local_execution(f, delta, C_k, gamma_c):
    """Bits executed and energy spent computing locally at frequency ``f`` Hz."""
    f = np.asarray(f, dtype=float)
    return f * delta / C_k, gamma_c * f ** 3 * delta


def offload_execution(delta_k, R, P_k):
    """Bits offloaded and energy spent transmitting for ``delta_k`` seconds."""
    delta_k = np.asarray(delta_k, dtype=float)
    return delta_k * R, delta_k * P_k


def update_task_queue(Q, A, l):
    """Next data backlog: ``max(Q + A - l, 0)``, elementwise."""
    return np.maximum(np.asarray(Q, dtype=float) + A - l, 0.0)


def update_virtual_queue(Q_u, E_uav, E_u, s_u):
    """Next virtual backlog: ``max(Q_u + s_u*(E_uav - E_u), 0)``."""
    return max(Q_u + s_u * (E_uav - E_u), 0.0)


def propulsion_power(v, C1, C2, C3, C4, v_tip):
    """Rotary-wing propulsion power [W] at horizontal speed ``v`` [m/s].

    Blade profile + induced + parasite terms.  The induced radicand
    ``sqrt(C3 + v^4/4) - v^2/2`` equals ``C3 / (sqrt(C3 + v^4/4) + v^2/2)``
    and is therefore positive for every speed.
    """
    v2 = v * v
    blade = C1 * (1.0 + 3.0 * v2 / (v_tip * v_tip))
    root = math.sqrt(C3 + v2 * v2 / 4.0)
    induced = C2 * math.sqrt(C3 / (root + v2 / 2.0))
    parasite = C4 * v2 * v
    return blade + induced + parasite


def _max_rates(config) -> np.ndarray:
    """Best-case uplink rates: overhead geometry with no NLoS blending."""
    from .channel import ChannelParams, rate_with_gamma

    rates = np.empty(config.K)
    for k in range(config.K):
        params = ChannelParams(
            a=config.a, b=config.b, g0=config.g0, kappa=config.kappa,
            iota_tilde=config.iota_tilde, h=config.h, W=config.W,
            N0=config.N0, P_k=config.P_k[k],
        )
        gamma = config.P_k[k] * config.g0 / config.N0  # blended factor forced to 1
        rates[k] = rate_with_gamma(np.zeros(2), np.zeros(2), gamma, params)
    return rates


def drift_constant(config) -> float:
    """Finite constant bounding the per-slot quadratic queue-growth terms.

    Diagnostic only, never used in control.  Uses scaled queue units: the
    worst per-slot propulsion energy is taken at the speed cap, the worst
    per-slot service at full CPU plus the overhead rate.
    """
    e_max = config.delta * propulsion_power(
        config.v_m, config.C1, config.C2, config.C3, config.C4, config.v_tip)
    e_dev = max(config.E_u ** 2, (e_max - config.E_u) ** 2)
    arr = config.s_q * config.I_k
    serv = config.s_q * (config.f_max * config.delta / config.C_k + _max_rates(config) * config.delta)
    return 0.5 * config.s_u ** 2 * e_dev + 0.5 * float(np.sum(arr ** 2 + serv ** 2))
