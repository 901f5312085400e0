import math

import numpy as np
import pytest

from spinpump import (DegenerateRatesError, NoStationaryStateError,
                      RateParams, SingularCoherenceBlockError, build_coherent,
                      build_incoherent, eliminate_coherences, rabi_flip_rate,
                      stationary_state, zero_chi)
from conftest import random_params


def test_coherent_matrix_reference_entries(ref_params):
    m = build_coherent(ref_params, zero_chi()).entries
    assert m.shape == (5, 5)
    assert m[0, 0] == -1.0
    assert m[0, 2] == 1.0
    assert m[1, 4] == -1.0
    assert m[2, 4] == 1.0
    assert m[4, 1] == 0.5
    assert m[4, 2] == -0.5
    assert m[3, 3] == -1.0 and m[4, 4] == -1.0


def test_population_rows_conserve_probability():
    rng = np.random.default_rng(10)
    for _ in range(25):
        p = random_params(rng, allow_dephasing=True)
        m = build_coherent(p, zero_chi()).entries
        assert np.abs(m[:3].sum(axis=0)).max() <= 1e-14


def test_rabi_off_decouples_coherences():
    rng = np.random.default_rng(11)
    p = RateParams(0.3, 0.7, 0.4, 0.2, r_rf=0.0, delta_esr=0.8)
    chi = rng.uniform(-np.pi, np.pi, 4)
    m = build_coherent(p, chi).entries
    assert m[1, 4] == 0.0 and m[2, 4] == 0.0
    assert m[4, 1] == 0.0 and m[4, 2] == 0.0


def test_flip_rate_values():
    assert rabi_flip_rate(RateParams.symmetric(1.0, 0.5)) == pytest.approx(0.25, abs=0)
    assert rabi_flip_rate(RateParams.symmetric(1.0, 0.0)) == 0.0
    assert rabi_flip_rate(RateParams.symmetric(1.0, 1.0, delta_esr=1.0)) \
        == pytest.approx(0.5, abs=0)


def test_flip_rate_degenerate_denominator():
    p = RateParams(0.5, 0.0, 0.5, 0.0, r_rf=0.5, delta_esr=0.0)
    with pytest.raises(DegenerateRatesError):
        rabi_flip_rate(p)


def test_incoherent_matrix_reference(ref_params):
    m = build_incoherent(ref_params, zero_chi()).entries
    expected = np.array([[-1.0, 0.0, 1.0],
                         [1.0, -0.25, 0.25],
                         [0.0, 0.25, -1.25]])
    np.testing.assert_array_equal(m.real, expected)
    assert np.abs(m.imag).max() == 0.0


def test_incoherent_column_sums_vanish():
    rng = np.random.default_rng(12)
    for _ in range(25):
        p = random_params(rng)
        m = build_incoherent(p, zero_chi()).entries
        assert np.abs(m.sum(axis=0)).max() <= 1e-14


def test_uniform_counting_shift_preserves_cycle_phase():
    rng = np.random.default_rng(13)
    p = random_params(rng)
    chi = rng.uniform(-np.pi, np.pi, 4)
    c = rng.uniform(-2, 2)
    m0 = build_incoherent(p, chi).entries
    m1 = build_incoherent(p, chi + c).entries
    # only the two counting entries change, by conjugate phase factors
    mask = np.ones((3, 3), dtype=bool)
    mask[0, 2] = mask[1, 0] = False
    np.testing.assert_allclose(m0[mask], m1[mask], atol=0)
    cycle0 = m0[0, 2] * m0[1, 0]
    cycle1 = m1[0, 2] * m1[1, 0]
    assert abs(cycle0 - cycle1) <= 1e-13 * abs(cycle0)


def test_counting_phases_are_periodic():
    rng = np.random.default_rng(14)
    p = random_params(rng)
    chi = rng.uniform(-np.pi, np.pi, 4)
    for k in range(4):
        shift = np.zeros(4)
        shift[k] = 2 * np.pi
        m0 = build_coherent(p, chi).entries
        m1 = build_coherent(p, chi + shift).entries
        np.testing.assert_allclose(m1, m0, atol=5e-15 * np.abs(m0).max())


def test_elimination_equals_sequential_with_doubled_flip_rate():
    # Exact identity: the adiabatic elimination reproduces the 3x3 structure
    # with flip rate 2*r**2*g/(g**2 + delta**2), i.e. twice rabi_flip_rate
    # at gamma_phi = 0 (reachable by scaling r_rf by sqrt(2)).
    rng = np.random.default_rng(15)
    worst = 0.0
    for _ in range(100):
        p = random_params(rng)
        chi = rng.uniform(-np.pi, np.pi, 4)
        reduced = eliminate_coherences(p, chi).entries
        doubled = build_incoherent(p.replace(r_rf=math.sqrt(2) * p.r_rf), chi)
        worst = max(worst, np.abs(reduced - doubled.entries).max())
    assert worst <= 1e-12


def test_elimination_dephasing_suppresses_flip_rate():
    p = RateParams.symmetric(1.0, 1.0, delta_esr=0.5)
    rates = []
    for gamma_phi in (0.0, 2.0, 20.0, 200.0):
        reduced = eliminate_coherences(p.replace(gamma_phi=gamma_phi), zero_chi())
        g = p.gamma_down_total + gamma_phi
        expected = 2 * p.r_rf ** 2 * g / (g ** 2 + p.delta_esr ** 2)
        assert reduced.entries[2, 1].real == pytest.approx(expected, rel=1e-12)
        rates.append(reduced.entries[2, 1].real)
    assert rates == sorted(rates, reverse=True)
    assert rates[-1] < 1e-2 * rates[0]


def test_gamma_phi_moves_only_coherence_diagonal(ref_params):
    base = build_coherent(ref_params, zero_chi()).entries
    dephased = build_coherent(ref_params.replace(gamma_phi=0.3), zero_chi()).entries
    diff = dephased - base
    expected = np.zeros((5, 5), dtype=complex)
    expected[3, 3] = expected[4, 4] = -0.3
    np.testing.assert_allclose(diff, expected, atol=1e-15)


def test_elimination_singular_block():
    p = RateParams(0.5, 0.0, 0.5, 0.0, r_rf=0.5, delta_esr=0.0)
    with pytest.raises(SingularCoherenceBlockError):
        eliminate_coherences(p, zero_chi())


def test_stationary_state_sequential(ref_params):
    pi = stationary_state(build_incoherent(ref_params, zero_chi()))
    np.testing.assert_allclose(pi, [1 / 7, 5 / 7, 1 / 7], atol=1e-12)
    assert pi.sum() == pytest.approx(1.0, abs=1e-10)
    assert (pi >= -1e-10).all()


def test_stationary_state_absorbing_at_zero_drive():
    p = RateParams.symmetric(1.0, 0.0)
    pi = stationary_state(build_incoherent(p, zero_chi()))
    np.testing.assert_allclose(pi, [0.0, 1.0, 0.0], atol=1e-12)


def test_stationary_state_coherent_differs_from_sequential(ref_params):
    # recorded behavior: the 5-dim stationary populations at the reference
    # point are (1/5, 3/5, 1/5), not the sequential (1/7, 5/7, 1/7)
    vec = stationary_state(build_coherent(ref_params, zero_chi()))
    np.testing.assert_allclose(vec[:3], [0.2, 0.6, 0.2], atol=1e-12)
    assert not np.allclose(vec[:3], [1 / 7, 5 / 7, 1 / 7], atol=1e-3)


def test_stationary_state_requires_zero_counting(ref_params):
    gen = build_incoherent(ref_params, np.array([0.9, -0.4, 0.3, 1.1]))
    with pytest.raises(NoStationaryStateError):
        stationary_state(gen)


def test_params_validation():
    with pytest.raises(ValueError):
        RateParams(-0.1, 0.5, 0.5, 0.5, r_rf=0.5)
    with pytest.raises(ValueError):
        RateParams(float("nan"), 0.5, 0.5, 0.5, r_rf=0.5)
    with pytest.warns(UserWarning):
        RateParams(0.0, 0.0, 0.0, 0.0, r_rf=0.5)


def test_counting_vector_validation(ref_params):
    with pytest.raises(ValueError):
        build_coherent(ref_params, [0.0, 0.0])
    with pytest.raises(ValueError):
        build_coherent(ref_params, [0.0, float("inf"), 0.0, 0.0])
