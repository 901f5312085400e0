"""Transfer cumulants of the pump up to third order.

Cumulants are derivatives of the counting eigenvalue branch with respect to
the real counting variable s = i*chi, taken at s = 0.  In this convention a
spin-down exit into lead eta carries exp(+s) and a spin-up entry carries
exp(-s), so all cumulants are real and channel currents are signed lead
electron-number rates.

Two independent methods are implemented:

* ``implicit`` -- total differentiation of p(lambda(s), s) = 0 through third
  order, with exact Taylor coefficients of the characteristic polynomial
  (machine precision; the reference method).
* ``finite_difference`` -- central differences on the real counting line
  with Richardson extrapolation (base step 1e-3, two refinement levels).
  Eigenvalues are evaluated in extended precision so the cross-check is not
  limited by double-precision roundoff of third-order stencils.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import series
from .generator import generator_builder
from .params import LEAD_CHANNELS, RateParams, chi_from_s
from .spectral import dominant_eigenvalue

REGIMES = ("coherent", "incoherent", "dephased")

FD_BASE_STEP = 1e-3
FD_REFINEMENTS = 2
FD_PRECISION_DPS = 40

#: agreement rule between the two methods
AGREEMENT_RELATIVE = 1e-6
AGREEMENT_ABSOLUTE = 1e-9
AGREEMENT_SMALL_VALUE = 1e-3

REALNESS_TOLERANCE = 1e-10


class DegenerateBranchError(ArithmeticError):
    """The counting branch is not simple at s = 0 (dp/dlambda vanishes)."""


class MethodsDisagreeError(ArithmeticError):
    """Implicit and finite-difference values differ beyond tolerance."""

    def __init__(self, multi_index, implicit_value, fd_value):
        self.multi_index = tuple(multi_index)
        self.implicit_value = implicit_value
        self.fd_value = fd_value
        super().__init__(
            f"methods disagree for index {self.multi_index}: "
            f"implicit {implicit_value!r} vs finite-difference {fd_value!r}")


def methods_agree(a: float, b: float) -> bool:
    ref = max(abs(a), abs(b))
    if ref < AGREEMENT_SMALL_VALUE:
        return abs(a - b) <= AGREEMENT_ABSOLUTE
    return abs(a - b) <= AGREEMENT_RELATIVE * ref


def _normalize_channels(multi_index) -> tuple[int, ...]:
    from .params import CHANNEL_INDEX
    out = []
    for item in multi_index:
        if isinstance(item, str):
            item = CHANNEL_INDEX[item]
        item = int(item)
        if not 0 <= item <= 3:
            raise ValueError(f"channel index out of range: {item}")
        out.append(item)
    if not 1 <= len(out) <= 3:
        raise ValueError("multi-index must contain one to three channels")
    return tuple(out)


class ImplicitEngine:
    """Exact branch derivatives from one Taylor expansion of the polynomial."""

    def __init__(self, params: RateParams, regime: str):
        gen0 = generator_builder(params, regime)(np.zeros(4))
        mat = series.generator_series(gen0.entries, params)
        self._coeffs = series.charpoly_series(mat)
        values_at_zero = [abs(c[0]) for c in self._coeffs]
        scale = max(values_at_zero)
        self._p_lambda = complex(self._coeffs[1][0])
        if abs(self._p_lambda) <= 1e-12 * max(scale, 1.0):
            raise DegenerateBranchError(
                "zero eigenvalue is not simple: dp/dlambda vanishes at the "
                "counting origin")

    def _q(self, m: int, channels=()) -> complex:
        return series.partial(self._coeffs[m], series.counts_for(channels))

    def derivative(self, channels: tuple[int, ...]) -> complex:
        pl = self._p_lambda
        first = {a: -self._q(0, (a,)) / pl for a in set(channels)}
        if len(channels) == 1:
            return first[channels[0]]

        def second(a, b):
            return -(self._q(0, (a, b))
                     + self._q(1, (a,)) * first[b]
                     + self._q(1, (b,)) * first[a]
                     + 2 * self._q(2) * first[a] * first[b]) / pl

        if len(channels) == 2:
            return second(*channels)

        a, b, c = channels
        lab, lac, lbc = second(a, b), second(a, c), second(b, c)
        la, lb, lc = first[a], first[b], first[c]
        total = (self._q(0, (a, b, c))
                 + self._q(1, (a, b)) * lc
                 + self._q(1, (a, c)) * lb
                 + self._q(1, (b, c)) * la
                 + 2 * (self._q(2, (a,)) * lb * lc
                        + self._q(2, (b,)) * la * lc
                        + self._q(2, (c,)) * la * lb)
                 + 6 * self._q(3) * la * lb * lc
                 + self._q(1, (a,)) * lbc
                 + self._q(1, (b,)) * lac
                 + self._q(1, (c,)) * lab
                 + 2 * self._q(2) * (la * lbc + lb * lac + lc * lab))
        return -total / pl


class FiniteDifferenceEngine:
    """Branch values on the real counting line, evaluated in high precision.

    Double precision seeds the Newton refinement: for the small offsets used
    by the stencils the branch is the root of maximal real part, which is
    cross-checked against the root separation and falls back to path
    continuation when inconclusive.
    """

    def __init__(self, params: RateParams, regime: str,
                 dps: int = FD_PRECISION_DPS):
        self.params = params
        self.dps = dps
        self._build = generator_builder(params, regime)
        self._cache: dict[tuple[float, ...], mp.mpf] = {}

    def _seed(self, s: np.ndarray) -> float:
        gen = self._build(chi_from_s(s))
        roots = np.linalg.eigvals(gen.entries)
        k = int(np.argmax(roots.real))
        lam = roots[k]
        others = np.delete(roots, k)
        gap = np.min(np.abs(others - lam)) if others.size else np.inf
        if abs(lam) > 0.2 * gap:
            lam = dominant_eigenvalue(self._build, chi_from_s(s)).lambda0
        return float(lam.real)

    def _charpoly_mp(self, s: np.ndarray) -> list:
        gen0 = self._build(np.zeros(4)).entries.real
        n = gen0.shape[0]
        m = [[mp.mpf(gen0[i, j]) for j in range(n)] for i in range(n)]
        p = self.params
        m[0][2] = (mp.mpf(p.gamma_l_down) * mp.exp(mp.mpf(s[1]))
                   + mp.mpf(p.gamma_r_down) * mp.exp(mp.mpf(s[3])))
        m[1][0] = (mp.mpf(p.gamma_l_up) * mp.exp(-mp.mpf(s[0]))
                   + mp.mpf(p.gamma_r_up) * mp.exp(-mp.mpf(s[2])))
        # Faddeev-LeVerrier trace recursion, monic ascending coefficients
        coeffs = [mp.mpf(0)] * (n + 1)
        coeffs[n] = mp.mpf(1)
        mk = [row[:] for row in m]
        coeffs[n - 1] = -sum(mk[i][i] for i in range(n))
        for k in range(2, n + 1):
            shifted = [[mk[i][j] + (coeffs[n - k + 1] if i == j else 0)
                        for j in range(n)] for i in range(n)]
            mk = [[sum(m[i][l] * shifted[l][j] for l in range(n))
                   for j in range(n)] for i in range(n)]
            coeffs[n - k] = -sum(mk[i][i] for i in range(n)) / k
        return coeffs

    def value(self, s_point: tuple[float, ...]) -> mp.mpf:
        cached = self._cache.get(s_point)
        if cached is not None:
            return cached
        s = np.asarray(s_point, dtype=float)
        with mp.workdps(self.dps):
            coeffs = self._charpoly_mp(s)
            lam = mp.mpf(self._seed(s))
            for _ in range(8):
                # Horner for p and p' simultaneously
                pval = coeffs[-1]
                dval = mp.mpf(0)
                for c in reversed(coeffs[:-1]):
                    dval = dval * lam + pval
                    pval = pval * lam + c
                if dval == 0:
                    break
                step = pval / dval
                lam = lam - step
                if abs(step) <= mp.mpf(10) ** (-self.dps + 2) * max(1, abs(lam)):
                    break
        self._cache[s_point] = lam
        return lam

    def derivative(self, channels: tuple[int, ...],
                   base_step: float = FD_BASE_STEP,
                   refinements: int = FD_REFINEMENTS) -> float:
        order = len(channels)
        with mp.workdps(self.dps):
            estimates = []
            for level in range(refinements + 1):
                h = base_step / 2 ** level
                total = mp.mpf(0)
                for signs in itertools.product((1, -1), repeat=order):
                    offsets = [0.0] * 4
                    for sign, ch in zip(signs, channels):
                        offsets[ch] += sign * h
                    parity = 1 if signs.count(-1) % 2 == 0 else -1
                    total += parity * self.value(tuple(offsets))
                estimates.append(total / (2 * mp.mpf(h)) ** order)
            factor = 4
            while len(estimates) > 1:
                estimates = [(factor * estimates[i + 1] - estimates[i]) / (factor - 1)
                             for i in range(len(estimates) - 1)]
                factor *= 4
            return float(estimates[0])


def _check_real(value: complex, context: str) -> float:
    if abs(value.imag) > REALNESS_TOLERANCE:
        raise ArithmeticError(
            f"{context} has imaginary part {value.imag:.3e} beyond tolerance")
    return value.real


def cumulant(regime: str, params: RateParams, multi_index,
             method: str = "implicit") -> float:
    """Mixed derivative of the counting branch for one multi-index.

    ``method`` is ``implicit``, ``finite_difference`` or ``both`` (computes
    both, raises :class:`MethodsDisagreeError` on mismatch, returns the
    implicit value).
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    channels = _normalize_channels(multi_index)
    if method == "implicit":
        value = ImplicitEngine(params, regime).derivative(channels)
        return _check_real(value, f"cumulant {channels}")
    if method == "finite_difference":
        return FiniteDifferenceEngine(params, regime).derivative(channels)
    if method == "both":
        implicit = _check_real(
            ImplicitEngine(params, regime).derivative(channels),
            f"cumulant {channels}")
        fd = FiniteDifferenceEngine(params, regime).derivative(channels)
        if not methods_agree(implicit, fd):
            raise MethodsDisagreeError(channels, implicit, fd)
        return implicit
    raise ValueError(f"unknown method {method!r}")


def independent_multi_indices() -> list[tuple[int, ...]]:
    """All 34 independent channel multi-indices up to order 3."""
    out = []
    for order in (1, 2, 3):
        out.extend(itertools.combinations_with_replacement(range(4), order))
    return out


@dataclass(frozen=True)
class CumulantSet:
    """Channel-resolved cumulants, symmetric in their indices.

    Channel order is (L up, L down, R up, R down) throughout.
    """

    first: np.ndarray   # (4,)
    second: np.ndarray  # (4, 4)
    third: np.ndarray   # (4, 4, 4)

    def tensor(self, order: int) -> np.ndarray:
        return (self.first, self.second, self.third)[order - 1]

    def spin_current(self, lead: str) -> float:
        up, down = LEAD_CHANNELS[lead]
        return float(self.first[up] - self.first[down])

    def charge_current(self, lead: str) -> float:
        up, down = LEAD_CHANNELS[lead]
        return float(self.first[up] + self.first[down])

    def spin_noise(self, leads: str) -> float:
        return spin_sign_combination(self, 2, leads)

    def spin_third(self, leads: str) -> float:
        return spin_sign_combination(self, 3, leads)


def spin_sign_combination(cs: CumulantSet, order: int, leads,
                          kind: str = "spin") -> float:
    """Spin-weighted (or plain charge) sum over spin assignments.

    For fixed leads, sums the cumulant over all spin assignments with weight
    prod(sign(spin)), sign(up) = +1 and sign(down) = -1; ``kind="charge"``
    uses weight +1 throughout.  Order 1 with ``kind="spin"`` is the spin
    current, with ``kind="charge"`` the charge current.
    """
    if order != len(leads):
        raise ValueError("number of leads must equal the cumulant order")
    if kind not in ("spin", "charge"):
        raise ValueError(f"unknown kind {kind!r}")
    tensor = cs.tensor(order)
    total = 0.0
    for spins in itertools.product((0, 1), repeat=order):
        chs = tuple(LEAD_CHANNELS[lead][spin] for lead, spin in zip(leads, spins))
        weight = (-1) ** sum(spins) if kind == "spin" else 1.0
        total += weight * float(tensor[chs])
    return total


def full_cumulant_set(regime: str, params: RateParams, *,
                      cross_check: bool = True, check_count: int = 5,
                      check_seed: int = 0) -> CumulantSet:
    """All 34 independent cumulants via the implicit method.

    When ``cross_check`` is set, a deterministic random subset of
    ``check_count`` multi-indices is re-evaluated by finite differences and
    :class:`MethodsDisagreeError` is raised on mismatch.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    engine = ImplicitEngine(params, regime)
    first = np.zeros(4)
    second = np.zeros((4, 4))
    third = np.zeros((4, 4, 4))
    indices = independent_multi_indices()
    for channels in indices:
        value = _check_real(engine.derivative(channels),
                            f"cumulant {channels}")
        if len(channels) == 1:
            first[channels[0]] = value
        elif len(channels) == 2:
            for perm in set(itertools.permutations(channels)):
                second[perm] = value
        else:
            for perm in set(itertools.permutations(channels)):
                third[perm] = value
    result = CumulantSet(first=first, second=second, third=third)

    if cross_check and check_count > 0:
        rng = np.random.default_rng(check_seed)
        chosen = rng.choice(len(indices), size=min(check_count, len(indices)),
                            replace=False)
        fd_engine = FiniteDifferenceEngine(params, regime)
        for pos in sorted(chosen):
            channels = indices[pos]
            implicit_value = float(result.tensor(len(channels))[channels])
            fd_value = fd_engine.derivative(channels)
            if not methods_agree(implicit_value, fd_value):
                raise MethodsDisagreeError(channels, implicit_value, fd_value)
    return result
