import itertools

import numpy as np
import pytest

from spinpump import (CumulantSet, DegenerateBranchError,
                      FiniteDifferenceEngine, ImplicitEngine, RateParams,
                      cumulant, full_cumulant_set, independent_multi_indices,
                      methods_agree, spin_sign_combination)
from spinpump.params import L_DOWN, L_UP, R_DOWN, R_UP
from conftest import random_params


def test_reference_current_values(ref_params):
    # stationary flux balance: |I| = 1/14 per channel at the reference point
    for channel, sign in ((L_UP, -1), (L_DOWN, +1), (R_UP, -1), (R_DOWN, +1)):
        value = cumulant("incoherent", ref_params, (channel,))
        assert value == pytest.approx(sign / 14, abs=1e-12)


def test_counted_entries_and_exits_have_opposite_signs():
    rng = np.random.default_rng(41)
    for _ in range(5):
        p = random_params(rng)
        for regime in ("coherent", "incoherent"):
            cs = full_cumulant_set(regime, p, cross_check=False)
            assert cs.first[L_UP] <= 0 and cs.first[R_UP] <= 0
            assert cs.first[L_DOWN] >= 0 and cs.first[R_DOWN] >= 0


def test_drive_off_kills_every_cumulant():
    p = RateParams(0.4, 0.6, 0.5, 0.7, r_rf=0.0, delta_esr=0.3)
    for regime in ("coherent", "incoherent"):
        for index in independent_multi_indices():
            assert abs(cumulant(regime, p, index)) <= 1e-12


def test_permutation_symmetry():
    rng = np.random.default_rng(42)
    p = random_params(rng)
    engine = ImplicitEngine(p, "coherent")
    for index in ((0, 1), (1, 3), (0, 1, 2), (1, 1, 3), (0, 2, 3)):
        values = [engine.derivative(perm).real
                  for perm in set(itertools.permutations(index))]
        assert max(values) - min(values) <= 1e-10


def test_cumulants_are_real():
    rng = np.random.default_rng(43)
    for regime in ("coherent", "incoherent"):
        p = random_params(rng)
        engine = ImplicitEngine(p, regime)
        for index in independent_multi_indices():
            assert abs(engine.derivative(index).imag) <= 1e-10


def test_spin_sign_combination_expansion():
    rng = np.random.default_rng(44)
    first = rng.normal(size=4)
    second = rng.normal(size=(4, 4))
    second = (second + second.T) / 2
    third = rng.normal(size=(4, 4, 4))
    third = sum(np.transpose(third, perm)
                for perm in itertools.permutations(range(3))) / 6
    cs = CumulantSet(first=first, second=second, third=third)

    # order 2, leads (L, R): the four terms with signs (+, +, -, -)
    expected = (second[L_UP, R_UP] + second[L_DOWN, R_DOWN]
                - second[L_UP, R_DOWN] - second[L_DOWN, R_UP])
    assert spin_sign_combination(cs, 2, "LR") == pytest.approx(expected, rel=1e-14)

    # order 3, leads (L, L, L): eight terms, sign = product of spin signs
    expected = (third[L_UP, L_UP, L_UP] + third[L_UP, L_DOWN, L_DOWN]
                + third[L_DOWN, L_UP, L_DOWN] + third[L_DOWN, L_DOWN, L_UP]
                - third[L_UP, L_UP, L_DOWN] - third[L_UP, L_DOWN, L_UP]
                - third[L_DOWN, L_UP, L_UP] - third[L_DOWN, L_DOWN, L_DOWN])
    assert spin_sign_combination(cs, 3, "LLL") == pytest.approx(expected, rel=1e-14)

    # order 1, all-plus weights give the charge current
    assert spin_sign_combination(cs, 1, "L", kind="charge") \
        == pytest.approx(first[L_UP] + first[L_DOWN], rel=1e-14)
    assert cs.charge_current("L") == pytest.approx(first[L_UP] + first[L_DOWN])
    assert cs.spin_current("R") == pytest.approx(first[R_UP] - first[R_DOWN])


def test_charge_cumulants_vanish():
    rng = np.random.default_rng(45)
    for regime in ("coherent", "incoherent"):
        # asymmetric couplings: total current still conserved
        p = random_params(rng)
        cs = full_cumulant_set(regime, p, cross_check=False)
        assert abs(cs.first.sum()) <= 1e-10
        assert np.abs(cs.second.sum(axis=0)).max() <= 1e-9
        assert np.abs(cs.third.sum(axis=(0, 1))).max() <= 1e-9

        # all-charge combinations across the four channels vanish with the
        # gauge orientation: summing any index over channels gives zero
        assert abs(cs.second.sum()) <= 1e-9
        assert abs(cs.third.sum()) <= 1e-9

        # symmetric couplings: per-lead charge current also vanishes
        gamma = rng.uniform(0.3, 2.0)
        ps = RateParams.symmetric(gamma, rng.uniform(0.1, 1.5),
                                  delta_esr=rng.uniform(-1, 1))
        css = full_cumulant_set(regime, ps, cross_check=False)
        assert abs(css.charge_current("L")) <= 1e-10
        assert abs(css.charge_current("R")) <= 1e-10


def test_pure_spin_transport_for_symmetric_couplings():
    rng = np.random.default_rng(46)
    for regime in ("coherent", "incoherent"):
        p = RateParams.symmetric(rng.uniform(0.3, 2.0), rng.uniform(0.1, 1.5),
                                 delta_esr=rng.uniform(-1, 1))
        cs = full_cumulant_set(regime, p, cross_check=False)
        for lead in "LR":
            up, down = {"L": (L_UP, L_DOWN), "R": (R_UP, R_DOWN)}[lead]
            assert abs(cs.first[up]) - abs(cs.first[down]) <= 1e-10


def test_methods_agree_rule():
    assert methods_agree(1.0, 1.0 + 5e-7)
    assert not methods_agree(1.0, 1.0 + 5e-6)
    assert methods_agree(1e-4, 1e-4 + 5e-10)
    assert not methods_agree(1e-4, 1e-4 + 5e-9)


def test_both_methods_cross_validate(ref_params):
    for index in ((L_DOWN,), (L_UP, R_DOWN), (L_DOWN, L_DOWN, R_UP)):
        for regime in ("coherent", "incoherent"):
            cumulant(regime, ref_params, index, method="both")


def test_finite_difference_handles_detuned_asymmetric_case():
    p = RateParams(0.3, 0.9, 0.7, 0.4, r_rf=1.1, delta_esr=-0.8,
                   gamma_phi=0.4)
    for regime in ("coherent", "dephased", "incoherent"):
        implicit = ImplicitEngine(p, regime)
        fd = FiniteDifferenceEngine(p, regime)
        for index in ((L_DOWN,), (L_UP, R_UP), (R_DOWN, R_DOWN, L_UP)):
            a = implicit.derivative(index).real
            b = fd.derivative(index)
            assert methods_agree(a, b), (regime, index, a, b)


def test_dephased_at_zero_gamma_phi_equals_coherent(ref_params):
    coherent = full_cumulant_set("coherent", ref_params, cross_check=False)
    dephased = full_cumulant_set("dephased", ref_params, cross_check=False)
    np.testing.assert_allclose(dephased.third, coherent.third, atol=1e-14)


def test_dephasing_interpolates_toward_suppressed_flip():
    # exploratory feature: growing gamma_phi suppresses transport through the
    # coherent matrix (the eliminated flip rate decays like 1/gamma_phi)
    p = RateParams.symmetric(1.0, 0.5)
    currents = [full_cumulant_set("dephased", p.replace(gamma_phi=g),
                                  cross_check=False).first[L_DOWN]
                for g in (0.0, 1.0, 10.0, 100.0)]
    assert currents == sorted(currents, reverse=True)
    assert currents[-1] < 0.03 * currents[0]


def test_degenerate_branch_error():
    # no drive and no spin-up coupling: the zero eigenvalue is not simple
    p = RateParams(0.0, 0.5, 0.0, 0.5, r_rf=0.0)
    with pytest.raises(DegenerateBranchError):
        ImplicitEngine(p, "incoherent")


def test_full_cumulant_set_cross_check_runs(ref_params):
    cs = full_cumulant_set("incoherent", ref_params, cross_check=True,
                           check_count=3)
    assert cs.first[L_DOWN] == pytest.approx(1 / 14, abs=1e-12)


def test_third_moment_sign_structure(ref_params):
    # auto-correlations negative in both regimes at the reference point
    for regime in ("coherent", "incoherent"):
        cs = full_cumulant_set(regime, ref_params, cross_check=False)
        assert cs.spin_third("LLL") < 0
        assert cs.spin_third("RRR") < 0
