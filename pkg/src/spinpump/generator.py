"""Counting-field-dressed generator matrices of the pump.

Two descriptions of the same device:

* ``build_coherent`` -- the 5-dimensional generator acting on
  (rho_00, rho_upup, rho_dndn, Re rho_updn, Im rho_updn), with the drive
  entering through off-diagonal Rabi couplings.
* ``build_incoherent`` -- the 3-state sequential-tunneling generator on
  populations only, with the drive reduced to the Lorentzian flip rate of
  :func:`rabi_flip_rate`.

``eliminate_coherences`` performs the adiabatic elimination of the two
coherence components of the 5x5 matrix exactly.  Note that the result is the
sequential-tunneling structure with *twice* the flip rate used by
``build_incoherent``; see the README for the quantitative comparison of the
two reductions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .params import (L_DOWN, L_UP, R_DOWN, R_UP, DegenerateRatesError,
                     RateParams, as_chi)


class Basis(enum.Enum):
    """State vector layout of a generator."""

    #: (rho_00, rho_upup, rho_dndn, Re rho_updn, Im rho_updn)
    COHERENT5 = 5
    #: (rho_00, rho_upup, rho_dndn)
    INCOHERENT3 = 3

    @property
    def dim(self) -> int:
        return self.value


@dataclass(frozen=True)
class GeneratorMatrix:
    basis: Basis
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.dim


class SingularCoherenceBlockError(ArithmeticError):
    """The 2x2 coherence block is not invertible (its determinant vanishes)."""


class NoStationaryStateError(ArithmeticError):
    """No numerically null eigenvector was found at zero counting fields."""


def _counting_factors(params: RateParams, chi: np.ndarray):
    """Dressed in/out tunneling sums.

    Returns (entry_sum, exit_sum): the spin-up entry amplitude carrying
    exp(-i chi_up) per lead, and the spin-down exit amplitude carrying
    exp(+i chi_down) per lead.
    """
    entry = (params.gamma_l_up * np.exp(-1j * chi[L_UP])
             + params.gamma_r_up * np.exp(-1j * chi[R_UP]))
    exit_ = (params.gamma_l_down * np.exp(1j * chi[L_DOWN])
             + params.gamma_r_down * np.exp(1j * chi[R_DOWN]))
    return entry, exit_


def build_coherent(params: RateParams, chi) -> GeneratorMatrix:
    """5x5 generator with counting phases, optional extra dephasing.

    ``params.gamma_phi`` is subtracted from the diagonal of the two coherence
    rows only, which leaves probability conservation untouched.
    """
    chi = as_chi(chi)
    entry, exit_ = _counting_factors(params, chi)
    gu = params.gamma_up_total
    gd = params.gamma_down_total
    r = params.r_rf
    delta = params.delta_esr
    gcoh = gd + params.gamma_phi
    m = np.array([
        [-gu,    0.0,  exit_, 0.0,    0.0],
        [entry,  0.0,  0.0,   0.0,   -2 * r],
        [0.0,    0.0,  -gd,   0.0,    2 * r],
        [0.0,    0.0,  0.0,   -gcoh, -delta],
        [0.0,    r,    -r,    delta, -gcoh],
    ], dtype=complex)
    return GeneratorMatrix(Basis.COHERENT5, m)


def rabi_flip_rate(params: RateParams) -> float:
    """Lorentzian spin-flip rate of the sequential-tunneling description.

    r_rf**2 * Gamma_down / (delta_esr**2 + Gamma_down**2), where Gamma_down
    is the total spin-down tunnel width.
    """
    gd = params.gamma_down_total
    denom = params.delta_esr ** 2 + gd ** 2
    if denom == 0.0:
        raise DegenerateRatesError(
            "flip rate undefined: delta_esr = 0 and the spin-down tunnel "
            "width is zero")
    return params.r_rf ** 2 * gd / denom


def build_incoherent(params: RateParams, chi) -> GeneratorMatrix:
    """3-state sequential-tunneling generator with counting phases."""
    chi = as_chi(chi)
    z = rabi_flip_rate(params)
    entry, exit_ = _counting_factors(params, chi)
    gu = params.gamma_up_total
    gd = params.gamma_down_total
    m = np.array([
        [-gu,   0.0, exit_],
        [entry, -z,  z],
        [0.0,   z,   -z - gd],
    ], dtype=complex)
    return GeneratorMatrix(Basis.INCOHERENT3, m)


def eliminate_coherences(params: RateParams, chi) -> GeneratorMatrix:
    """Adiabatically eliminate the coherences of the 5x5 generator.

    Sets the time derivatives of (Re rho_updn, Im rho_updn) to zero, solves
    the resulting pair of linear equations for the coherences in terms of the
    populations, and substitutes back into the population rows.  The exact
    result equals the ``build_incoherent`` matrix with the flip rate replaced
    by 2 * r_rf**2 * g / (g**2 + delta_esr**2), g = Gamma_down + gamma_phi.
    """
    full = build_coherent(params, chi).entries
    pop = full[:3, :3]
    pop_from_coh = full[:3, 3:]
    coh_from_pop = full[3:, :3]
    block = full[3:, 3:]
    det = block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0]
    if det == 0:
        raise SingularCoherenceBlockError(
            "coherence block is singular (zero spin-down width, dephasing "
            "and detuning)")
    reduced = pop - pop_from_coh @ np.linalg.solve(block, coh_from_pop)
    return GeneratorMatrix(Basis.INCOHERENT3, reduced)


def stationary_state(gen: GeneratorMatrix, tol: float = 1e-8) -> np.ndarray:
    """Normalised null vector of a generator built at zero counting fields.

    Populations (the first three components) sum to one.  Raises
    :class:`NoStationaryStateError` when the smallest eigenvalue magnitude
    exceeds ``tol`` times the matrix scale.
    """
    m = gen.entries
    scale = max(np.abs(m).max(), 1.0)
    values, vectors = np.linalg.eig(m)
    k = int(np.argmin(np.abs(values)))
    if abs(values[k]) > tol * scale:
        raise NoStationaryStateError(
            f"smallest eigenvalue magnitude {abs(values[k]):.3e} exceeds "
            f"tolerance {tol * scale:.3e}")
    vec = vectors[:, k]
    norm = vec[:3].sum()
    if abs(norm) < 1e-14:
        raise NoStationaryStateError("null vector has zero total population")
    vec = vec / norm
    return vec.real


def generator_builder(params: RateParams, regime: str):
    """Closure chi -> GeneratorMatrix for a named transport regime.

    ``coherent`` and ``dephased`` use the 5x5 matrix (dephased simply means a
    nonzero ``gamma_phi`` is expected); ``incoherent`` uses the 3x3 one.
    """
    if regime in ("coherent", "dephased"):
        return lambda chi: build_coherent(params, chi)
    if regime == "incoherent":
        return lambda chi: build_incoherent(params, chi)
    raise ValueError(f"unknown regime {regime!r}")
