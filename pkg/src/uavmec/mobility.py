"""Gauss-Markov user mobility: per-slot velocity and position updates.

Velocities follow a first-order autoregression with memory ``alpha`` around
the asymptotic mean ``v_bar``; the driving noise is standard normal and
``sigma_bar`` scales it so the stationary per-component std equals
``sigma_bar``.  Users are not confined to any region.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["UserKinematics", "step_velocity", "step_position"]


from dataclasses import dataclass


@dataclass
class UserKinematics:
    """Planar position [m] and velocity [m/s] of one ground user."""

    p: np.ndarray
    v: np.ndarray


def step_velocity(v, alpha, v_bar, sigma_bar, noise):
    """Advance a velocity one slot.

    ``noise`` is a 2-vector of standard-normal samples; the update is
    ``alpha*v + (1-alpha)*v_bar + sigma_bar*sqrt(1-alpha^2)*noise``.
    """
    v = np.asarray(v, dtype=float)
    v_bar = np.asarray(v_bar, dtype=float)
    noise = np.asarray(noise, dtype=float)
    return alpha * v + (1.0 - alpha) * v_bar + sigma_bar * math.sqrt(1.0 - alpha * alpha) * noise


def step_position(p, v, delta):
    """Advance a position one slot of length ``delta`` seconds: ``p + v*delta``."""
    return np.asarray(p, dtype=float) + np.asarray(v, dtype=float) * delta
