"""Shared helpers: small scenarios and randomized slot problems."""

import numpy as np
import pytest

from uavmec.config import default_config
from uavmec.lyapunov import build_slot_problem
from uavmec.system import QueueState


def small_config(**kw):
    """Two-user scenario sized for fast solves."""
    base = dict(
        K=2, N=60,
        p_I=np.array([0.0, 0.0]), p_F=np.array([300.0, 0.0]),
        ue_init=np.array([[80.0, 40.0], [160.0, -30.0]]),
        seed=0,
    )
    base.update(kw)
    return default_config(**base)


def single_user_config(**kw):
    base = dict(
        K=1, N=60,
        p_I=np.array([0.0, 0.0]), p_F=np.array([200.0, 0.0]),
        ue_init=np.array([[60.0, 20.0]]),
    )
    base.update(kw)
    return default_config(**base)


def random_slot_problem(rng, config=None, n=None, q_scale=8e6, qu_scale=3.0):
    """A feasible random mid-episode slot problem."""
    c = config if config is not None else default_config()
    n = n if n is not None else int(rng.integers(1, min(c.N, 120)))
    # keep the destination comfortably reachable
    max_dist = c.v_m * (c.N - n) * c.delta
    for _ in range(200):
        p_u = rng.uniform([-50, -50], [650, 500])
        if np.linalg.norm(c.p_F - p_u) <= 0.8 * max_dist:
            break
    ue = rng.uniform([0, 0], [600, 450], size=(c.K, 2))
    Q = rng.uniform(0, q_scale, size=c.K) * (rng.random(c.K) < 0.8)
    arr = np.where(rng.random(c.K) < c.rho_k, c.I_k, 0.0)
    Qu = float(rng.uniform(0, qu_scale)) * (rng.random() < 0.7)
    queues = QueueState(Q_k=Q, Q_u=Qu)
    return build_slot_problem(queues, arr, p_u, ue, c, n)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
