"""Air-to-ground channel with elevation-dependent line-of-sight probability.

The expected large-scale gain blends the LoS and attenuated NLoS paths via a
sigmoid of the elevation angle; the uplink rate is Shannon capacity over that
expected gain.  Angles are in degrees because the sigmoid parameters ``a``
and ``b`` are calibrated in degrees.

For use inside a slot, the blended-probability factor is frozen at the
slot-start geometry (the elevation angle barely changes within one slot);
``snr_coefficient`` computes that frozen factor and ``rate_with_gamma``
evaluates the rate at any candidate position under it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelParams",
    "elevation_angle",
    "los_probability",
    "expected_gain",
    "uplink_rate",
    "snr_coefficient",
    "rate_with_gamma",
]


@dataclass(frozen=True)
class ChannelParams:
    """Link constants for one user."""

    a: float
    b: float
    g0: float          # reference gain at 1 m, linear
    kappa: float       # NLoS attenuation, linear, in (0, 1]
    iota_tilde: float  # path-loss exponent (>= 2)
    h: float           # UAV altitude [m]
    W: float           # bandwidth [Hz]
    N0: float          # noise power [W]
    P_k: float         # user transmit power [W]

    @property
    def iota(self) -> float:
        return self.iota_tilde / 2.0


def elevation_angle(p_u, p_k, h):
    """Elevation angle [deg] from user to UAV; 90 when directly overhead."""
    d = float(np.linalg.norm(np.asarray(p_u, dtype=float) - np.asarray(p_k, dtype=float)))
    return math.degrees(math.atan2(h, d))


def los_probability(theta, a, b):
    """Sigmoid LoS probability at elevation ``theta`` degrees, in (0, 1)."""
    return 1.0 / (1.0 + a * math.exp(-b * (theta - a)))


def _blended_probability(p_u, p_k, params: ChannelParams) -> float:
    """LoS probability blended with the attenuated NLoS path: in [kappa, 1]."""
    theta = elevation_angle(p_u, p_k, params.h)
    p_los = los_probability(theta, params.a, params.b)
    return p_los + (1.0 - p_los) * params.kappa


def expected_gain(p_u, p_k, params: ChannelParams):
    """Expected channel power gain (linear) between UAV and user."""
    p_hat = _blended_probability(p_u, p_k, params)
    d2 = float(np.sum((np.asarray(p_u, dtype=float) - np.asarray(p_k, dtype=float)) ** 2))
    return p_hat * params.g0 / (params.h ** 2 + d2) ** (params.iota_tilde / 2.0)


def snr_coefficient(p_u, p_k, params: ChannelParams) -> float:
    """Numerator of the SNR with the blended probability frozen at (p_u, p_k).

    Equals ``P_k * P_hat * g0 / N0``; dividing by ``(h^2 + d^2)^iota`` at any
    candidate UAV position gives the SNR there.
    """
    return params.P_k * _blended_probability(p_u, p_k, params) * params.g0 / params.N0


def rate_with_gamma(p, p_k, gamma, params: ChannelParams):
    """Uplink rate [bits/s] at UAV position ``p`` with frozen SNR coefficient."""
    d2 = float(np.sum((np.asarray(p, dtype=float) - np.asarray(p_k, dtype=float)) ** 2))
    return params.W * math.log2(1.0 + gamma / (params.h ** 2 + d2) ** params.iota)


def uplink_rate(p_u, p_k, params: ChannelParams):
    """Uplink rate [bits/s] with the blended probability evaluated at (p_u, p_k)."""
    return rate_with_gamma(p_u, p_k, snr_coefficient(p_u, p_k, params), params)
