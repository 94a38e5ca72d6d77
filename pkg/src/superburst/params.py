"""Physical parameters, pulse specification, and single-atom state.

Unit conventions: time in ns, hbar*omega = 1, so every power in the code
is a photon flux in photons/ns. The default decay rate corresponds to
Gamma/2pi = 5.22 MHz, i.e. Gamma = 0.032797 per ns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError

GAMMA_DEFAULT = 0.032797  # 1/ns, = 2*pi*5.22 MHz
BETA_MEAN_DEFAULT = 0.0112
BETA_STD_DEFAULT = 0.0065

RECTANGULAR = "rectangular"
SMOOTHED = "smoothed-edge"

DRIVEN_PULSE = "driven-pulse"
IDEAL_INSTANT = "ideal-instantaneous"


@dataclass(frozen=True)
class PhysicalParams:
    """Single-atom rates and ensemble size.

    gamma        : total decay rate of one atom (1/ns)
    beta_nominal : nominal forward guided-mode coupling, dimensionless
    n_atoms      : number of atoms in the cascade
    """

    gamma: float = GAMMA_DEFAULT
    beta_nominal: float = BETA_MEAN_DEFAULT
    n_atoms: int = 1

    def __post_init__(self) -> None:
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ConfigError(f"gamma must be positive and finite, got {self.gamma}")
        if not (0.0 < self.beta_nominal < 1.0):
            raise ConfigError(
                f"beta_nominal must lie in (0, 1), got {self.beta_nominal}"
            )
        if self.n_atoms < 1:
            raise ConfigError(f"n_atoms must be >= 1, got {self.n_atoms}")


@dataclass(frozen=True)
class PulseSpec:
    """Resonant excitation pulse ending exactly at t = 0.

    area      : pulse area in radians seen by the first atom at the
                nominal coupling (A = integral of the Rabi frequency)
    duration  : pulse length in ns; the pulse occupies [-duration, 0]
    shape     : RECTANGULAR or SMOOTHED (raised-cosine ramps)
    ramp_time : ramp length in ns, smoothed shape only
    detuning  : fixed to 0; the model is resonant by construction
    """

    area: float
    duration: float = 4.0
    shape: str = RECTANGULAR
    ramp_time: float = 0.5
    detuning: float = 0.0

    def __post_init__(self) -> None:
        if not (self.area >= 0.0 and math.isfinite(self.area)):
            raise ConfigError(f"pulse area must be >= 0 and finite, got {self.area}")
        if self.duration <= 0.0:
            raise ConfigError(f"pulse duration must be > 0, got {self.duration}")
        if self.shape not in (RECTANGULAR, SMOOTHED):
            raise ConfigError(f"unknown pulse shape {self.shape!r}")
        if self.shape == SMOOTHED:
            if not (0.0 < self.ramp_time and 2.0 * self.ramp_time <= self.duration):
                raise ConfigError(
                    "smoothed-edge pulse needs 0 < ramp_time <= duration/2"
                )
        if self.detuning != 0.0:
            raise ConfigError("only resonant driving is supported (detuning = 0)")


@dataclass(frozen=True)
class AtomState:
    """Expectation values of one two-level atom.

    s   : dipole expectation <sigma> (complex)
    p_e : excited-state population <sigma^dag sigma>
    """

    s: complex
    p_e: float

    BLOCH_TOL = 1e-9

    def __post_init__(self) -> None:
        if not (-self.BLOCH_TOL <= self.p_e <= 1.0 + self.BLOCH_TOL):
            raise ConfigError(f"p_e must lie in [0, 1], got {self.p_e}")
        if abs(self.s) ** 2 > self.p_e * (1.0 - self.p_e) + self.BLOCH_TOL:
            raise ConfigError(
                "state violates the Bloch-ball bound |s|^2 <= p_e(1 - p_e)"
            )

    @staticmethod
    def ground() -> "AtomState":
        return AtomState(0.0 + 0.0j, 0.0)
