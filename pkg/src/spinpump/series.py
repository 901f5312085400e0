"""Truncated multivariate Taylor arithmetic for characteristic polynomials.

Generators depend on the four counting variables only through the factors
exp(+s_down) and exp(-s_up) in two matrix entries, so every characteristic
polynomial coefficient is an entire function of s.  This module expands the
coefficients as Taylor series around s = 0, truncated at total degree 3 in
the four variables, which is exactly what third-order implicit
differentiation of the eigenvalue branch needs.

A series is a dense complex vector over the 35 monomials of total degree
<= 3 in 4 variables (graded-lexicographic order, constant term first).
Matrices of series are stored as arrays of shape (n, n, 35).
"""

from __future__ import annotations

import itertools
import math

import numpy as np

N_VARS = 4
MAX_DEG = 3


def _enumerate_monomials():
    monos = []
    for deg in range(MAX_DEG + 1):
        for combo in itertools.combinations_with_replacement(range(N_VARS), deg):
            e = [0] * N_VARS
            for v in combo:
                e[v] += 1
            monos.append(tuple(e))
    return tuple(monos)


MONOMIALS = _enumerate_monomials()
N_MONO = len(MONOMIALS)
MONO_INDEX = {m: i for i, m in enumerate(MONOMIALS)}


def _build_product_table():
    """Index triples (i, j, k) with monomial_i * monomial_j = monomial_k."""
    src_i, src_j, dst = [], [], []
    for i, mi in enumerate(MONOMIALS):
        for j, mj in enumerate(MONOMIALS):
            if sum(mi) + sum(mj) > MAX_DEG:
                continue
            mk = tuple(a + b for a, b in zip(mi, mj))
            src_i.append(i)
            src_j.append(j)
            dst.append(MONO_INDEX[mk])
    scatter = np.zeros((len(dst), N_MONO))
    scatter[np.arange(len(dst)), dst] = 1.0
    return np.array(src_i), np.array(src_j), scatter


_SRC_I, _SRC_J, _SCATTER = _build_product_table()


def constant(value) -> np.ndarray:
    out = np.zeros(N_MONO, dtype=complex)
    out[0] = value
    return out


def exponential(coefficient, var: int, sign: int) -> np.ndarray:
    """Series of coefficient * exp(sign * s_var)."""
    out = np.zeros(N_MONO, dtype=complex)
    for d in range(MAX_DEG + 1):
        e = [0] * N_VARS
        e[var] = d
        out[MONO_INDEX[tuple(e)]] = coefficient * sign ** d / math.factorial(d)
    return out


def mat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two (n, n, N_MONO) series matrices, truncated."""
    n = a.shape[0]
    terms = np.einsum("act,cbt->abt", a[:, :, _SRC_I], b[:, :, _SRC_J])
    return (terms.reshape(n * n, -1) @ _SCATTER).reshape(n, n, N_MONO)


def mat_trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=0, axis2=1)


def add_scalar_to_diagonal(a: np.ndarray, scalar: np.ndarray) -> np.ndarray:
    out = a.copy()
    n = a.shape[0]
    out[np.arange(n), np.arange(n)] += scalar
    return out


def charpoly_series(mat: np.ndarray) -> list[np.ndarray]:
    """Faddeev-LeVerrier over series entries.

    Returns the coefficients of det(lambda*I - M) in ascending order
    [q0, ..., qn] with qn = 1, each a Taylor series in the four counting
    variables.
    """
    n = mat.shape[0]
    coeffs = [None] * (n + 1)
    coeffs[n] = constant(1.0)
    mk = mat.copy()
    coeffs[n - 1] = -mat_trace(mk)
    for k in range(2, n + 1):
        mk = mat_multiply(mat, add_scalar_to_diagonal(mk, coeffs[n - k + 1]))
        coeffs[n - k] = -mat_trace(mk) / k
    return coeffs


def partial(series: np.ndarray, counts) -> complex:
    """Partial derivative at s = 0 for variable multiplicities ``counts``."""
    counts = tuple(counts)
    scale = 1.0
    for c in counts:
        scale *= math.factorial(c)
    return complex(series[MONO_INDEX[counts]]) * scale


def counts_for(channels) -> tuple[int, ...]:
    """Multiplicity tuple of a (possibly repeating) channel multi-index."""
    e = [0] * N_VARS
    for ch in channels:
        e[ch] += 1
    return tuple(e)


def generator_series(gen_entries: np.ndarray, params) -> np.ndarray:
    """Series form of a generator built at chi = 0.

    Only entries (0, 2) and (1, 0) carry counting factors: the spin-down exit
    sum with exp(+s) per lead and the spin-up entry sum with exp(-s) per
    lead.  All other entries are constants.
    """
    from .params import L_DOWN, L_UP, R_DOWN, R_UP

    n = gen_entries.shape[0]
    out = np.zeros((n, n, N_MONO), dtype=complex)
    out[:, :, 0] = gen_entries
    out[0, 2] = (exponential(params.gamma_l_down, L_DOWN, +1)
                 + exponential(params.gamma_r_down, R_DOWN, +1))
    out[1, 0] = (exponential(params.gamma_l_up, L_UP, -1)
                 + exponential(params.gamma_r_up, R_UP, -1))
    return out
