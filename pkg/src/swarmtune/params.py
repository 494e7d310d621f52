"""Tunable controller parameters, their search bounds, and model constants."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, fields

import numpy as np

PARAM_NAMES = (
    "sigma", "eta_s", "eta_r", "kappa",
    "omega_0", "omega_I", "tau_q", "tau_r", "tau_c",
)

# search box, one (low, high) row per parameter in PARAM_NAMES order
PARAM_BOUNDS = np.array([
    [1e-3, 4.0],   # sigma    swarm interaction spatial scale (points)
    [1e-3, 4.0],   # eta_s    swarm connections learning rate (1/s)
    [1e-3, 4.0],   # eta_r    reward connections learning rate (1/s)
    [1e-3, 4.0],   # kappa    reward interaction spatial scale (points)
    [0.0, 1.0],    # omega_0  baseline oscillatory frequency (cycles/s)
    [0.0, 1.0],    # omega_I  max increase in oscillatory frequency
    [0.0, 1.0],    # tau_q    swarming-input time constant (s)
    [0.0, 1.0],    # tau_r    reward-input time constant (s)
    [0.0, 1.0],    # tau_c    sensory-cue-input time constant (s)
])

N_PARAMS = len(PARAM_NAMES)


class ParamBoundsError(ValueError):
    """A parameter lies outside its allowed range."""


@dataclass(frozen=True)
class ParamVector:
    """The 9 tunable controller parameters; the optimization search point."""

    sigma: float
    eta_s: float
    eta_r: float
    kappa: float
    omega_0: float
    omega_I: float
    tau_q: float
    tau_r: float
    tau_c: float

    def __post_init__(self):
        for name, (lo, hi) in zip(PARAM_NAMES, PARAM_BOUNDS):
            v = getattr(self, name)
            if not np.isfinite(v) or not (lo <= v <= hi):
                raise ParamBoundsError(f"{name}={v} outside [{lo}, {hi}]")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    @classmethod
    def from_array(cls, x) -> "ParamVector":
        x = np.asarray(x, dtype=float).reshape(-1)
        if len(x) != N_PARAMS:
            raise ValueError(f"expected {N_PARAMS} parameters, got {len(x)}")
        return cls(**dict(zip(PARAM_NAMES, map(float, x))))

    @classmethod
    def clamped(cls, **values) -> "ParamVector":
        """Build a vector, clamping out-of-range values with a warning.

        Used by replay so externally supplied parameter sets (e.g. legacy
        defaults with kappa above the search bound) run rather than fail.
        """
        clean = {}
        for name, (lo, hi) in zip(PARAM_NAMES, PARAM_BOUNDS):
            v = float(values[name])
            c = min(max(v, lo), hi)
            if c != v:
                warnings.warn(f"{name}={v} clamped to {c}", stacklevel=2)
            clean[name] = c
        return cls(**clean)


@dataclass(frozen=True)
class SwarmConstants:
    """Model constants held fixed across optimization."""

    n_agents: int = 300
    dt: float = 0.01          # s
    duration: float = 200.0   # s
    e_max: float = 3e3        # max kinetic energy, kg*points^2/s^2
    mu_m: float = 0.9         # momentum coefficient, kg
    g_s: float = 0.5          # swarming input gain
    g_r: float = 0.3          # reward input gain
    g_c: float = 0.2          # sensory cue input gain
    d_rad: float = 12.0       # reward capture radius, points
    w_floor: float = 1e-6     # minimum weight, keeps log(W) finite

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))

    def steps_for(self, seconds: float) -> int:
        return int(round(seconds / self.dt))
