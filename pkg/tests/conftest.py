import pytest

from spinpump import RateParams, default_figure_spec, run_sweep


@pytest.fixture(scope="session")
def ref_params():
    """Equal couplings Gamma = 1, resonant drive r_rf = 0.5."""
    return RateParams.symmetric(1.0, 0.5)


@pytest.fixture(scope="session")
def default_sweep_result():
    """The reference 60-point sweep over r_rf, coherent + incoherent."""
    return run_sweep(default_figure_spec())


def random_params(rng, allow_detuning=True, allow_dephasing=False):
    """Positive random couplings and drive, optionally detuned/dephased."""
    return RateParams(
        gamma_l_up=rng.uniform(0.05, 2.0),
        gamma_l_down=rng.uniform(0.05, 2.0),
        gamma_r_up=rng.uniform(0.05, 2.0),
        gamma_r_down=rng.uniform(0.05, 2.0),
        r_rf=rng.uniform(0.05, 2.0),
        delta_esr=rng.uniform(-2.0, 2.0) if allow_detuning else 0.0,
        gamma_phi=rng.uniform(0.0, 1.5) if allow_dephasing else 0.0,
    )
