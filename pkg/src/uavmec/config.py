"""Scenario configuration: physical constants, algorithm knobs, file loading.

The config file format is flat ``key = value`` text.  ``#`` starts a comment.
Scalars are plain numbers; 2-vectors are two numbers separated by spaces or
commas (``p_I = 0 0``); per-user lists are either a single number (broadcast
to all K users) or K comma-separated numbers; user start positions are K
``x y`` pairs separated by semicolons.  Unknown keys are rejected.  Absent
keys take the defaults below (the four-user scenario used throughout the
test suite).  Units follow the field table in the README.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ScenarioConfig", "ConfigError", "load_config", "default_config"]


class ConfigError(ValueError):
    """Raised for unparsable files, unknown keys, or invariant violations.

    ``key`` names the offending entry when one can be identified.
    """

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


def _vec2(x):
    return np.asarray(x, dtype=float).reshape(2)


@dataclass
class ScenarioConfig:
    # --- scenario geometry and horizon ---
    K: int = 4                      # number of ground users
    N: int = 200                    # number of time slots
    delta: float = 1.0              # slot length [s]
    h: float = 100.0                # UAV altitude [m]
    v_m: float = 25.0               # max UAV horizontal speed [m/s]
    p_I: np.ndarray = field(default_factory=lambda: _vec2([0.0, 0.0]))      # start [m]
    p_F: np.ndarray = field(default_factory=lambda: _vec2([600.0, 0.0]))    # destination [m]
    ue_init: np.ndarray = field(default_factory=lambda: np.array(
        [[200.0, 100.0], [200.0, 200.0], [200.0, 300.0], [200.0, 400.0]]))  # [m], shape (K,2)

    # --- user mobility (Gauss-Markov) ---
    alpha: float = 0.4              # velocity memory, in [0,1]
    v_bar: np.ndarray = field(default_factory=lambda: _vec2([1.0, 0.0]))    # asymptotic mean velocity [m/s]
    sigma_bar: float = 2.0          # asymptotic per-component velocity std [m/s]

    # --- channel ---
    W: float = 1e6                  # bandwidth [Hz]
    N0: float = 1e-12               # noise power [W]
    P_k: np.ndarray = field(default_factory=lambda: np.array(0.1))          # transmit power [W]
    g0: float = 1e-5                # reference channel gain at 1 m (linear; -50 dB)
    iota_tilde: float = 2.2         # path-loss exponent
    kappa: float = 0.2              # NLoS attenuation (linear, <=1)
    a: float = 9.61                 # LoS sigmoid parameter (urban default)
    b: float = 0.16                 # LoS sigmoid parameter (urban default)

    # --- tasks and computing ---
    rho_k: np.ndarray = field(default_factory=lambda: np.array(0.8))        # arrival probability
    I_k: np.ndarray = field(default_factory=lambda: np.array(2.2e6))        # task size [bits]
    C_k: np.ndarray = field(default_factory=lambda: np.array(1000.0))       # cycles per bit
    gamma_c: float = 1e-28          # effective capacitance [J s^2 / cycle^3]
    f_max: np.ndarray = field(default_factory=lambda: np.array(1e9))        # max CPU frequency [Hz]

    # --- UAV propulsion ---
    C1: float = 80.0
    C2: float = 22.0
    C3: float = 263.4
    C4: float = 0.0092
    v_tip: float = 120.0            # rotor tip speed [m/s]
    E_u: float = 170.0              # per-slot average UAV energy budget [J]

    # --- controller weights and scaling ---
    V: float = 50.0                 # energy/backlog tradeoff weight
    w_k: np.ndarray = field(default_factory=lambda: np.array(1.0))          # user energy weights
    s_q: float = 1e-6               # data-queue scale applied to bits inside the objective
    s_u: float = 0.1                # virtual-queue scale applied to joule deviations

    # --- solver / iteration knobs ---
    sca_eps: float = 0.01           # outer-iteration objective stall threshold
    sca_max_iter: int = 50
    barrier_gap: float = 3e-8       # absolute duality-gap target of the inner solver
    feas_tol: float = 1e-6          # feasibility tolerance (scaled units)
    stat_tol: float = 1e-5          # relative stationarity tolerance
    delta_floor: float = 1e-9       # lower bound on offload durations inside the solver [s]

    seed: int = 0

    def __post_init__(self):
        self.K = int(self.K)
        self.N = int(self.N)
        self.seed = int(self.seed)
        self.sca_max_iter = int(self.sca_max_iter)
        self.p_I = _vec2(self.p_I)
        self.p_F = _vec2(self.p_F)
        self.v_bar = _vec2(self.v_bar)
        self.ue_init = np.asarray(self.ue_init, dtype=float).reshape(-1, 2)
        for name in ("P_k", "rho_k", "I_k", "C_k", "f_max", "w_k"):
            v = np.asarray(getattr(self, name), dtype=float).ravel()
            if v.size == 1:
                v = np.full(self.K, float(v[0]))
            setattr(self, name, v)
        self.validate()

    def validate(self):
        """Check every invariant; raise ConfigError naming the offending key."""
        if self.K < 1:
            raise ConfigError("K", "need at least one user")
        if self.N < 1:
            raise ConfigError("N", "need at least one slot")
        if not self.delta > 0:
            raise ConfigError("delta", "slot length must be positive")
        if not self.h > 0:
            raise ConfigError("h", "altitude must be positive")
        if not self.v_m > 0:
            raise ConfigError("v_m", "max speed must be positive")
        if not (0.0 < self.kappa <= 1.0):
            raise ConfigError("kappa", "NLoS attenuation must be in (0, 1]")
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError("alpha", "mobility memory must be in [0, 1]")
        if self.sigma_bar < 0:
            raise ConfigError("sigma_bar", "velocity std must be >= 0")
        if np.any(self.rho_k < 0) or np.any(self.rho_k > 1):
            raise ConfigError("rho_k", "arrival probabilities must be in [0, 1]")
        if self.ue_init.shape != (self.K, 2):
            raise ConfigError("ue_init", f"need {self.K} x-y start positions, got shape {self.ue_init.shape}")
        for name in ("P_k", "rho_k", "I_k", "C_k", "f_max", "w_k"):
            v = getattr(self, name)
            if v.shape != (self.K,):
                raise ConfigError(name, f"need 1 or {self.K} values, got {v.size}")
        for name in ("P_k", "I_k", "f_max", "w_k"):
            if np.any(getattr(self, name) < 0):
                raise ConfigError(name, "must be >= 0")
        if np.any(self.C_k <= 0):
            raise ConfigError("C_k", "cycles per bit must be positive")
        if not self.g0 > 0:
            raise ConfigError("g0", "reference gain must be positive")
        if not self.N0 > 0:
            raise ConfigError("N0", "noise power must be positive")
        if self.iota_tilde < 2:
            raise ConfigError("iota_tilde", "path-loss exponent must be >= 2")
        if not (self.a > 0 and self.b > 0):
            raise ConfigError("a" if self.a <= 0 else "b", "sigmoid parameters must be positive")
        if self.gamma_c < 0:
            raise ConfigError("gamma_c", "must be >= 0")
        for name in ("C1", "C2", "C4", "E_u", "V"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be >= 0")
        if not self.C3 > 0:
            raise ConfigError("C3", "must be positive")
        if not self.v_tip > 0:
            raise ConfigError("v_tip", "rotor tip speed must be positive")
        if not self.s_q > 0:
            raise ConfigError("s_q", "queue scale must be positive")
        if not self.s_u > 0:
            raise ConfigError("s_u", "virtual-queue scale must be positive")
        reach = float(np.linalg.norm(self.p_F - self.p_I))
        budget = self.v_m * self.N * self.delta
        if reach > budget + 1e-9:
            raise ConfigError("p_F", f"destination {reach:.1f} m away exceeds reachable {budget:.1f} m")

    def replace(self, **kw) -> "ScenarioConfig":
        return dataclasses.replace(self, **kw)


def default_config(**overrides) -> ScenarioConfig:
    """The four-user default scenario, with optional field overrides."""
    return ScenarioConfig(**overrides)


_VECTOR2_KEYS = {"p_I", "p_F", "v_bar"}
_PER_UE_KEYS = {"P_k", "rho_k", "I_k", "C_k", "f_max", "w_k"}
_INT_KEYS = {"K", "N", "seed", "sca_max_iter"}
_ALL_KEYS = {f.name for f in dataclasses.fields(ScenarioConfig)}


def _parse_numbers(text, key):
    parts = text.replace(",", " ").split()
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(key, f"cannot parse number list from {text!r}") from None


def load_config(path) -> ScenarioConfig:
    """Load a scenario from flat key/value text; absent keys keep defaults."""
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(None, f"line {lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _ALL_KEYS:
                raise ConfigError(key, "unknown key")
            if key in raw:
                raise ConfigError(key, "duplicate key")
            raw[key] = (lineno, value)

    kw = {}
    for key, (lineno, value) in raw.items():
        if key == "ue_init":
            rows = [r for r in value.split(";") if r.strip()]
            parsed = [_parse_numbers(r, key) for r in rows]
            if any(len(r) != 2 for r in parsed):
                raise ConfigError(key, "each position needs exactly x and y")
            kw[key] = np.array(parsed)
        elif key in _VECTOR2_KEYS:
            nums = _parse_numbers(value, key)
            if len(nums) != 2:
                raise ConfigError(key, f"expected 2 components, got {len(nums)}")
            kw[key] = np.array(nums)
        elif key in _PER_UE_KEYS:
            kw[key] = np.array(_parse_numbers(value, key))
        elif key in _INT_KEYS:
            try:
                kw[key] = int(float(value))
            except ValueError:
                raise ConfigError(key, f"cannot parse integer from {value!r}") from None
        else:
            try:
                kw[key] = float(value)
            except ValueError:
                raise ConfigError(key, f"cannot parse number from {value!r}") from None

    try:
        return ScenarioConfig(**kw)
    except TypeError as exc:
        raise ConfigError(None, str(exc)) from None
