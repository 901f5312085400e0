"""Characteristic polynomials and the cumulant-generating eigenvalue branch.

The cumulant generating function of the counting process is the eigenvalue
branch of the dressed generator that vanishes at zero counting fields.  This
module extracts the characteristic polynomial exactly (Faddeev-LeVerrier),
follows that branch by continuation in the counting fields, and provides a
closed-form Cardano solver for the 3x3 sequential-tunneling cubic together
with a legacy coefficient set kept for diagnostic comparison.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .generator import GeneratorMatrix, build_incoherent
from .params import L_DOWN, L_UP, R_DOWN, R_UP, RateParams, as_chi, zero_chi


class BranchCrossingError(ArithmeticError):
    """Two polynomial roots approached within tolerance during continuation."""


@dataclass(frozen=True)
class CharPoly:
    """det(M - lambda*I) coefficients, constant term first."""

    coefficients: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, lam: complex) -> complex:
        acc = 0.0 + 0.0j
        for c in self.coefficients[::-1]:
            acc = acc * lam + c
        return acc

    def derivative(self, lam: complex) -> complex:
        acc = 0.0 + 0.0j
        coeffs = self.coefficients
        for k in range(len(coeffs) - 1, 0, -1):
            acc = acc * lam + k * coeffs[k]
        return acc

    def roots(self) -> np.ndarray:
        return np.roots(self.coefficients[::-1])


@dataclass(frozen=True)
class CgfValue:
    lambda0: complex
    chi: np.ndarray = field(repr=False)


def _faddeev_leverrier(m: np.ndarray) -> np.ndarray:
    """Monic det(lambda*I - M) coefficients, ascending, by trace recursion."""
    n = m.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[n] = 1.0
    mk = m.copy()
    coeffs[n - 1] = -np.trace(mk)
    eye = np.eye(n)
    for k in range(2, n + 1):
        mk = m @ (mk + coeffs[n - k + 1] * eye)
        coeffs[n - k] = -np.trace(mk) / k
    return coeffs


def char_poly(gen: GeneratorMatrix) -> CharPoly:
    """Exact characteristic polynomial det(gen - lambda*I).

    The leading coefficient is (-1)**n; at zero counting fields the constant
    term vanishes because probability conservation keeps lambda = 0 in the
    spectrum.
    """
    if not np.all(np.isfinite(gen.entries)):
        raise ValueError("generator entries must be finite")
    monic = _faddeev_leverrier(gen.entries)
    return CharPoly(monic * (-1) ** gen.dim)


def _newton_polish(poly: CharPoly, lam: complex, iterations: int = 4) -> complex:
    for _ in range(iterations):
        dp = poly.derivative(lam)
        if dp == 0:
            break
        step = poly(lam) / dp
        lam = lam - step
        if abs(step) < 1e-17 * max(1.0, abs(lam)):
            break
    return lam


def cardano_roots(a: complex, b: complex, c: complex, d: complex) -> np.ndarray:
    """All three roots of a*x**3 + b*x**2 + c*x + d via Cardano's formula.

    Written in the depressed form x = -(b + xi*C + delta0/(xi*C)) / (3a) over
    the three cube-root branches xi, with the cancellation-avoiding choice of
    the square-root sign inside C.
    """
    if a == 0:
        raise ValueError("leading coefficient must be nonzero")
    delta0 = b * b - 3 * a * c
    delta1 = 2 * b ** 3 - 9 * a * b * c + 27 * a * a * d
    inner = cmath.sqrt(delta1 * delta1 - 4 * delta0 ** 3)
    if abs(delta1 + inner) >= abs(delta1 - inner):
        big = (delta1 + inner) / 2
    else:
        big = (delta1 - inner) / 2
    if big == 0:
        # triple root
        return np.full(3, -b / (3 * a), dtype=complex)
    croot = big ** (1 / 3)
    omega = complex(-0.5, math.sqrt(3) / 2)
    roots = []
    for k in range(3):
        xi = croot * omega ** k
        roots.append(-(b + xi + delta0 / xi) / (3 * a))
    return np.array(roots, dtype=complex)


def _roots_companion(poly: CharPoly) -> np.ndarray:
    return poly.roots()


def _roots_cardano(poly: CharPoly) -> np.ndarray:
    d, c, b, a = poly.coefficients
    return cardano_roots(a, b, c, d)


def dominant_eigenvalue(build, chi, *, max_step: float = 0.05,
                        root_solver=None, degeneracy_tol: float = 1e-8) -> CgfValue:
    """Eigenvalue branch continuously connected to 0 at zero counting fields.

    ``build`` maps a counting vector to a :class:`GeneratorMatrix`.  The
    branch is tracked from chi = 0 to the requested chi along a straight
    line, with at most ``max_step`` change per counting entry and bisection
    refinement whenever the nearest-root assignment becomes ambiguous.  A
    persistent ambiguity at the smallest step raises
    :class:`BranchCrossingError` instead of silently picking a root.
    """
    chi = as_chi(chi)
    if root_solver is None:
        root_solver = _roots_companion

    poly0 = char_poly(build(zero_chi()))
    roots0 = root_solver(poly0)
    lam = roots0[int(np.argmin(np.abs(roots0)))]

    span = float(np.max(np.abs(chi)))
    if span == 0.0:
        return CgfValue(_newton_polish(poly0, lam), chi)

    n_steps = max(1, math.ceil(span / max_step))
    min_dt = 1.0 / (n_steps * 64)

    t = 0.0
    target_stack = [k / n_steps for k in range(n_steps, 0, -1)]
    poly = poly0
    while target_stack:
        t_next = target_stack[-1]
        poly = char_poly(build(t_next * chi))
        roots = root_solver(poly)
        dist = np.abs(roots - lam)
        order = np.argsort(dist)
        best, second = order[0], order[1]
        ambiguous = dist[best] > 0.3 * dist[second]
        if ambiguous and (t_next - t) > min_dt:
            target_stack.append((t + t_next) / 2)
            continue
        if ambiguous and abs(roots[best] - roots[second]) < degeneracy_tol:
            raise BranchCrossingError(
                f"roots {roots[best]:.6g} and {roots[second]:.6g} are within "
                f"{degeneracy_tol:g} at t = {t_next:.6g} along the counting path")
        lam = roots[best]
        t = t_next
        target_stack.pop()

    return CgfValue(_newton_polish(poly, lam), chi)


def _require_equal_couplings(params: RateParams) -> float:
    rates = (params.gamma_l_up, params.gamma_l_down,
             params.gamma_r_up, params.gamma_r_down)
    scale = max(abs(r) for r in rates)
    if scale == 0.0 or max(rates) - min(rates) > 1e-12 * scale:
        raise ValueError(
            "closed-form cubic coefficients require all four tunnel rates "
            "equal (gamma/2 each)")
    return 2.0 * rates[0]


def _phase_product_sum(chi: np.ndarray) -> complex:
    """Sum of the four entry/exit phase products around the transport cycle."""
    up = np.exp(-1j * np.array([chi[R_UP], chi[L_UP], chi[L_UP], chi[R_UP]]))
    down = np.exp(1j * np.array([chi[R_DOWN], chi[R_DOWN], chi[L_DOWN], chi[L_DOWN]]))
    return complex(np.sum(up * down))


def cubic_coefficients_equal_coupling(params: RateParams, chi,
                                      variant: str = "exact"):
    """Coefficients (a, b, c, d) of the sequential-tunneling cubic.

    ``variant="exact"`` expands det(M - lambda*I) of the 3x3 generator and
    rescales it so the leading coefficient is 4*(delta**2 + gamma**2); in
    this normalisation d = X*(4 - sum of phase products), X = r**2 * gamma**3.

    ``variant="legacy"`` returns an older closed-form coefficient set
    retained as a diagnostic.  Its a, b, c are dimensionally inconsistent
    (a mixes gamma**2 and gamma terms) and deviate from the exact expansion;
    d coincides with the exact one.
    """
    chi = as_chi(chi)
    gamma = _require_equal_couplings(params)
    r = params.r_rf
    delta = params.delta_esr
    x = r ** 2 * gamma ** 3
    d = 4 * x - x * _phase_product_sum(chi)
    if variant == "legacy":
        a = 4 * delta ** 2 - gamma ** 2 - gamma
        b = 8 * gamma * delta ** 2 - 8 * r ** 2 * gamma - 2 * gamma ** 3
        c = 12 * r ** 2 * gamma ** 2 - gamma ** 4 - 4 * gamma ** 2 * delta ** 2
        return a, b, c, d
    if variant != "exact":
        raise ValueError(f"unknown variant {variant!r}")
    monic = _faddeev_leverrier(build_incoherent(params, chi).entries)
    scale = 4 * (delta ** 2 + gamma ** 2)
    q0, q1, q2, _ = monic
    return scale, scale * q2, scale * q1, scale * q0


def _legacy_radicand(a, b, c, d):
    return (4 * c ** 3 * a - c ** 2 * b ** 2 - 18 * c * b * a * d
            + 27 * d ** 2 * a ** 2 + 4 * d * b ** 3 * a)


def legacy_min_eigenvalue(params: RateParams, chi, branch: int = 0) -> complex:
    """Evaluate the legacy closed-form branch expression verbatim.

    The scale factor K is read as the principal cube root of the radical
    combination (the only dimensionally possible reading of the legacy
    form); ``branch`` selects among the three cube-root branches.  This is a
    diagnostic: the legacy coefficients carry inconsistencies, so the value
    generally deviates from the true branch.
    """
    a, b, c, d = cubic_coefficients_equal_coupling(params, chi, variant="legacy")
    k_cubed = (36 * c * b * a - 108 * d * a ** 2 - 8 * b ** 3
               + 12 * math.sqrt(3) * cmath.sqrt(_legacy_radicand(a, b, c, d)))
    k = k_cubed ** (1 / 3)
    if k == 0:
        raise ArithmeticError("legacy expression degenerates: K = 0")
    omega = complex(-0.5, math.sqrt(3) / 2)
    k = k * omega ** (branch % 3)
    return (k - 2 * b - 4 * (3 * c * a - b ** 2) / k) / (6 * a)


def closed_form_incoherent_ev0(params: RateParams, chi,
                               corrected: bool = True) -> CgfValue:
    """Closed-form value of the sequential-tunneling eigenvalue branch.

    With ``corrected=True`` the exact cubic coefficients are solved by
    Cardano's formula and the branch connected to 0 is selected by the same
    continuation rule as :func:`dominant_eigenvalue` (falling back to
    companion-matrix roots if the Cardano form degenerates).  With
    ``corrected=False`` the legacy expression is evaluated verbatim on its
    principal branches; the caller is expected to compare the result against
    :func:`dominant_eigenvalue` and report the deviation.
    """
    chi = as_chi(chi)
    if not corrected:
        return CgfValue(legacy_min_eigenvalue(params, chi), chi)
    _require_equal_couplings(params)

    def cardano_solver(poly: CharPoly) -> np.ndarray:
        try:
            return _roots_cardano(poly)
        except (ArithmeticError, ZeroDivisionError):  # degenerate Cardano form
            warnings.warn("Cardano form degenerated; using companion roots",
                          stacklevel=2)
            return _roots_companion(poly)

    build = lambda c: build_incoherent(params, c)
    return dominant_eigenvalue(build, chi, root_solver=cardano_solver)
