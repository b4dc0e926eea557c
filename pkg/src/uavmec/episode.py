"""Episode orchestration: seeded randomness, the slot loop, and the trace.

One master seed is split into named child streams (arrivals, mobility) so
every policy faces identical randomness on the same seed.  Randomness is
drawn in a fixed order each slot, before the policy acts, which makes traces
bit-identical across repeat runs and across policies' random inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import ge_step, go_step
from .config import ScenarioConfig
from .lyapunov import build_slot_problem, objective_value
from .mobility import step_position, step_velocity
from .sca import solve_joint_slot
from .solver import SolverFailure
from .system import QueueState, update_task_queue, update_virtual_queue

__all__ = ["EpisodeTrace", "EpisodeError", "run_episode", "moving_average",
           "sample_arrivals", "POLICIES"]

POLICIES = ("joint", "go", "ge")


class EpisodeError(RuntimeError):
    """A slot's solver failed after the retry; carries the slot index."""

    def __init__(self, slot, cause):
        self.slot = slot
        super().__init__(f"slot {slot}: {cause}")


@dataclass
class EpisodeTrace:
    """Per-slot record of one episode; all physical units.

    Row ``n`` holds the start-of-slot state (queues, positions) together with
    that slot's arrivals, decision outcomes, and energies.  The post-horizon
    queue state and UAV position are kept separately.
    """

    policy: str
    seed: int
    N: int
    K: int
    Q_bits: np.ndarray          # (N, K) data backlogs at slot start
    Q_u_joule: np.ndarray       # (N,) virtual backlog at slot start [J]
    arrivals_bits: np.ndarray   # (N, K)
    l_local_bits: np.ndarray    # (N, K)
    l_offload_bits: np.ndarray  # (N, K)
    E_ue: np.ndarray            # (N, K) per-user energy [J]
    E_uav: np.ndarray           # (N,) propulsion energy [J]
    E_sys: np.ndarray           # (N,) weighted user energy sum [J]
    uav_pos: np.ndarray         # (N+1, 2) positions, last row is the final one
    ue_pos: np.ndarray          # (N+1, K, 2)
    sca_iters: np.ndarray       # (N,)
    objective: np.ndarray       # (N,) per-slot objective at the applied decision
    final_Q_bits: np.ndarray    # (K,)
    final_Q_u_joule: float
    sca_histories: list = field(default_factory=list, repr=False)

    def terminal_averages(self) -> dict:
        """Prefix means at n = N, the quantities the time-series plots track."""
        return {
            "uav_energy_J": float(np.mean(self.E_uav)),
            "ue_queue_bits": float(np.mean(np.mean(self.Q_bits, axis=1))),
            "system_energy_J": float(np.mean(self.E_sys)),
        }


def sample_arrivals(config: ScenarioConfig, rng) -> np.ndarray:
    """One slot of task arrivals: ``I_k`` bits with probability ``rho_k``."""
    u = rng.random(config.K)
    return np.where(u < config.rho_k, config.I_k, 0.0)


def moving_average(series, n) -> float:
    """Arithmetic mean of the first ``n`` entries."""
    series = np.asarray(series, dtype=float)
    if not 1 <= n <= series.shape[0]:
        raise ValueError(f"n={n} outside 1..{series.shape[0]}")
    return float(np.mean(series[:n]))


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(2)
    return (np.random.default_rng(children[0]),   # arrivals
            np.random.default_rng(children[1]))   # mobility noise


def run_episode(config: ScenarioConfig, policy: str, collect_sca=False) -> EpisodeTrace:
    """Run the full control loop for one policy and return its trace.

    Identical (config, seed, policy) inputs give bit-identical traces.  A
    per-slot solver failure is retried once from a fallback start inside the
    policy; if it still fails the episode aborts with the slot index.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    c = config
    N, K = c.N, c.K
    arr_rng, mob_rng = _streams(c.seed)

    queues = QueueState(Q_k=np.zeros(K), Q_u=0.0)
    p_u = c.p_I.copy()
    ue_p = c.ue_init.copy()
    ue_v = np.tile(c.v_bar, (K, 1))

    tr = EpisodeTrace(
        policy=policy, seed=c.seed, N=N, K=K,
        Q_bits=np.zeros((N, K)), Q_u_joule=np.zeros(N),
        arrivals_bits=np.zeros((N, K)),
        l_local_bits=np.zeros((N, K)), l_offload_bits=np.zeros((N, K)),
        E_ue=np.zeros((N, K)), E_uav=np.zeros(N), E_sys=np.zeros(N),
        uav_pos=np.zeros((N + 1, 2)), ue_pos=np.zeros((N + 1, K, 2)),
        sca_iters=np.zeros(N, dtype=int), objective=np.zeros(N),
        final_Q_bits=np.zeros(K), final_Q_u_joule=0.0,
    )

    step = {"joint": solve_joint_slot, "go": go_step, "ge": ge_step}[policy]

    for n in range(1, N + 1):
        i = n - 1
        # fixed draw order, independent of the policy
        arrivals = sample_arrivals(c, arr_rng)
        noise = mob_rng.standard_normal((K, 2))

        tr.Q_bits[i] = queues.Q_k
        tr.Q_u_joule[i] = queues.Q_u / c.s_u
        tr.arrivals_bits[i] = arrivals
        tr.uav_pos[i] = p_u
        tr.ue_pos[i] = ue_p

        problem = build_slot_problem(queues, arrivals, p_u, ue_p, c, n)
        try:
            decision = step(problem)
        except SolverFailure as exc:
            raise EpisodeError(n, exc) from exc

        tr.l_local_bits[i] = decision.l_c
        tr.l_offload_bits[i] = decision.l_o
        tr.E_ue[i] = decision.E_k
        tr.E_uav[i] = decision.E_uav
        tr.E_sys[i] = float(np.sum(c.w_k * decision.E_k))
        tr.sca_iters[i] = decision.sca_iters
        tr.objective[i] = objective_value(problem, decision)
        if collect_sca:
            tr.sca_histories.append(list(decision.sca_history))

        queues = QueueState(
            Q_k=update_task_queue(queues.Q_k, arrivals, decision.l_k),
            Q_u=update_virtual_queue(queues.Q_u, decision.E_uav, c.E_u, c.s_u),
        )
        p_u = decision.p_next
        ue_v_next = np.empty_like(ue_v)
        ue_p_next = np.empty_like(ue_p)
        for k in range(K):
            ue_p_next[k] = step_position(ue_p[k], ue_v[k], c.delta)
            ue_v_next[k] = step_velocity(ue_v[k], c.alpha, c.v_bar, c.sigma_bar, noise[k])
        ue_p, ue_v = ue_p_next, ue_v_next

    tr.uav_pos[N] = p_u
    tr.ue_pos[N] = ue_p
    tr.final_Q_bits = queues.Q_k.copy()
    tr.final_Q_u_joule = queues.Q_u / c.s_u
    return tr
