"""Physical parameters and counting-field conventions.

Channel ordering used throughout the package: (L, up), (L, down), (R, up),
(R, down).  Counting phases attach to dot-lead transfer events only: a
spin-down electron leaving the dot into lead ``eta`` carries ``exp(+i chi)``
on channel ``(eta, down)``; a spin-up electron entering the dot from lead
``eta`` carries ``exp(-i chi)`` on channel ``(eta, up)``.  With this
orientation the counted quantity is the signed change of each lead's electron
number, so the four channel currents always sum to zero.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

CHANNELS = ("L_up", "L_down", "R_up", "R_down")
L_UP, L_DOWN, R_UP, R_DOWN = range(4)
CHANNEL_INDEX = {name: i for i, name in enumerate(CHANNELS)}

#: channels belonging to each lead, (up, down)
LEAD_CHANNELS = {"L": (L_UP, L_DOWN), "R": (R_UP, R_DOWN)}
LEADS = ("L", "R")

#: weight of each channel in spin combinations (+1 for up, -1 for down)
SPIN_SIGN = np.array([+1.0, -1.0, +1.0, -1.0])


class DegenerateRatesError(ValueError):
    """Raised when a rate expression has a vanishing denominator."""


@dataclass(frozen=True)
class RateParams:
    """All rates of the pump, in units of a reference rate (inverse time).

    gamma_* are the four tunnel couplings, r_rf the drive-induced spin-flip
    rate, delta_esr the drive detuning and gamma_phi an optional extra
    coherence-relaxation rate (0 gives the bare coherent model).
    """

    gamma_l_up: float
    gamma_l_down: float
    gamma_r_up: float
    gamma_r_down: float
    r_rf: float
    delta_esr: float = 0.0
    gamma_phi: float = 0.0

    def __post_init__(self):
        for name in ("gamma_l_up", "gamma_l_down", "gamma_r_up",
                     "gamma_r_down", "r_rf", "delta_esr", "gamma_phi"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if name != "delta_esr" and value < 0.0:
                raise ValueError(f"{name} must be non-negative, got {value!r}")
        if self.gamma_up_total <= 0.0 and self.gamma_down_total <= 0.0:
            warnings.warn(
                "both tunnel channels are closed (all gamma rates zero); "
                "no transport can occur", stacklevel=2)

    @property
    def gamma_up_total(self) -> float:
        return self.gamma_l_up + self.gamma_r_up

    @property
    def gamma_down_total(self) -> float:
        return self.gamma_l_down + self.gamma_r_down

    def replace(self, **changes) -> "RateParams":
        return dataclasses.replace(self, **changes)

    @classmethod
    def symmetric(cls, gamma: float, r_rf: float, delta_esr: float = 0.0,
                  gamma_phi: float = 0.0) -> "RateParams":
        """Equal-coupling pump: each of the four tunnel rates is gamma/2."""
        half = 0.5 * gamma
        return cls(half, half, half, half, r_rf, delta_esr, gamma_phi)


def as_chi(chi) -> np.ndarray:
    """Validate and normalise a counting vector to a complex length-4 array.

    Real values are the physical counting fields (radians).  Complex values
    are accepted because differentiation runs along the imaginary-chi line
    (the real counting variable s = i*chi).
    """
    arr = np.asarray(chi, dtype=complex)
    if arr.shape != (4,):
        raise ValueError(f"counting vector must have four entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("counting vector entries must be finite")
    return arr


def zero_chi() -> np.ndarray:
    """The distinguished no-counting point."""
    return np.zeros(4, dtype=complex)


def chi_from_s(s) -> np.ndarray:
    """Counting vector on the real counting line: chi = -i*s for real s."""
    s = np.asarray(s, dtype=float)
    if s.shape != (4,):
        raise ValueError(f"counting variable must have four entries, got shape {s.shape}")
    return -1j * s
