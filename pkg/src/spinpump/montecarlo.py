"""Kinetic Monte Carlo oracle for the sequential-tunneling regime.

Samples trajectories of the 3-state chain (empty, spin-up, spin-down) with
per-channel transfer counting and estimates cumulants from the long-time
count statistics.  Counts follow the generator's phase orientation: a
spin-up entry from lead eta decrements channel (eta, up), a spin-down exit
increments channel (eta, down), so each count vector is the signed change of
lead electron numbers and its four entries sum to the (bounded) dot charge
difference.

Trajectories use independent, splittable random streams derived from
(seed, trajectory index); results are bitwise reproducible and independent
of scheduling or chunk sizes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .generator import build_incoherent, rabi_flip_rate, stationary_state
from .params import RateParams

_CHUNK = 4096

#: kernel exit codes
_DONE = 0
_ABSORBED = 1
_NEED_DRAWS = 2


class InsufficientSamplesError(ValueError):
    """Fewer trajectories than required for cumulant estimation."""


@dataclass(frozen=True)
class TrajectoryConfig:
    t_final: float
    n_trajectories: int
    seed: int
    regime: str = "incoherent"

    def __post_init__(self):
        if self.regime != "incoherent":
            raise ValueError("trajectory sampling is defined for the "
                             "incoherent regime only")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.n_trajectories <= 0:
            raise ValueError("n_trajectories must be positive")


@njit(cache=True)
def _advance(state, t, t_final, counts, exps, unis, n_draws,
             glu, gld, gru, grd, z):
    """Consume pre-drawn randoms until t_final, absorption or exhaustion.

    Each event uses exactly one exponential and at most one uniform; the
    kernel returns for a refill before starting an event it cannot finish,
    so stream consumption is independent of chunk size.
    """
    gu = glu + gru
    gd = gld + grd
    i = 0
    while True:
        if state == 0:
            total = gu
        elif state == 1:
            total = z
        else:
            total = z + gd
        if total <= 0.0:
            return state, t, _ABSORBED, i
        if i >= n_draws:
            return state, t, _NEED_DRAWS, i
        dt = exps[i] / total
        if t + dt >= t_final:
            i += 1
            return state, t_final, _DONE, i
        t += dt
        u = unis[i] * total
        i += 1
        if state == 0:
            # spin-up electron enters from one of the leads
            if u < glu:
                counts[0] -= 1
            else:
                counts[2] -= 1
            state = 1
        elif state == 1:
            state = 2
        else:
            if u < z:
                state = 1
            elif u < z + gld:
                counts[1] += 1
                state = 0
            else:
                counts[3] += 1
                state = 0


def _trajectory_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_waiting_times(rng: np.random.Generator, total_rate: float,
                         n: int) -> np.ndarray:
    """Exponential waiting times for a frozen state with the given exit rate."""
    if total_rate <= 0:
        raise ValueError("total exit rate must be positive")
    return rng.standard_exponential(n) / total_rate


def simulate(params: RateParams, cfg: TrajectoryConfig) -> np.ndarray:
    """Sample net transfer counts; returns an int64 array (n_trajectories, 4).

    The initial state of every trajectory is drawn from the stationary
    distribution of the 3-state chain.
    """
    z = rabi_flip_rate(params)
    pi = stationary_state(build_incoherent(params, np.zeros(4)))
    cum_pi = np.cumsum(pi)

    positive = [r for r in (params.gamma_l_up, params.gamma_l_down,
                            params.gamma_r_up, params.gamma_r_down, z) if r > 0]
    if positive and cfg.t_final * min(positive) < 50:
        warnings.warn(
            "t_final times the smallest positive rate is below 50; count "
            "statistics may not have reached stationarity", stacklevel=2)

    samples = np.zeros((cfg.n_trajectories, 4), dtype=np.int64)
    for idx in range(cfg.n_trajectories):
        rng = _trajectory_rng(cfg.seed, idx)
        state = int(np.searchsorted(cum_pi, rng.random(), side="right"))
        state = min(state, 2)
        t = 0.0
        counts = samples[idx]
        while True:
            exps = rng.standard_exponential(_CHUNK)
            unis = rng.random(_CHUNK)
            state, t, status, _ = _advance(
                state, t, cfg.t_final, counts, exps, unis, _CHUNK,
                params.gamma_l_up, params.gamma_l_down,
                params.gamma_r_up, params.gamma_r_down, z)
            if status != _NEED_DRAWS:
                break
    return samples


def write_samples(samples: np.ndarray, path) -> None:
    """Raw sample dump: one row per trajectory, tab-delimited.

    Columns: trajectory index, then net counts for channels L_up, L_down,
    R_up, R_down.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("trajectory\tn_L_up\tn_L_down\tn_R_up\tn_R_down\n")
        for idx, row in enumerate(samples):
            fh.write(f"{idx}\t{row[0]}\t{row[1]}\t{row[2]}\t{row[3]}\n")


@dataclass(frozen=True)
class EmpiricalCumulants:
    """Count cumulant estimates per unit time with jackknife errors."""

    first: np.ndarray
    second: np.ndarray
    third: np.ndarray
    first_se: np.ndarray
    second_se: np.ndarray
    third_se: np.ndarray
    n_trajectories: int
    t_final: float
    _replicates: tuple  # leave-one-out estimates, for combination errors

    def combination(self, weights_by_order: dict[int, np.ndarray]):
        """Point estimate and jackknife error of a linear combination.

        ``weights_by_order`` maps order (1, 2 or 3) to a weight tensor of the
        matching shape; usually a single order is passed.
        """
        tensors = {1: self.first, 2: self.second, 3: self.third}
        point = 0.0
        repl = 0.0
        for order, weights in weights_by_order.items():
            weights = np.asarray(weights, dtype=float)
            point += float(np.sum(weights * tensors[order]))
            repl = repl + np.tensordot(
                self._replicates[order - 1], weights,
                axes=(tuple(range(1, order + 1)), tuple(range(order))))
        n = self.n_trajectories
        se = float(np.sqrt((n - 1) / n * np.sum((repl - repl.mean()) ** 2)))
        return point, se


def _central_moments(s1, s2, s3, n):
    """First three central comoment tensors from raw power sums."""
    mu = s1 / n
    m2 = s2 / n - np.einsum("...a,...b->...ab", mu, mu)
    m3 = (s3 / n
          - np.einsum("...a,...bc->...abc", mu, s2 / n)
          - np.einsum("...b,...ac->...abc", mu, s2 / n)
          - np.einsum("...c,...ab->...abc", mu, s2 / n)
          + 2 * np.einsum("...a,...b,...c->...abc", mu, mu, mu))
    return mu, m2, m3


def empirical_cumulants(samples: np.ndarray, t_final: float,
                        min_samples: int = 100) -> EmpiricalCumulants:
    """Cumulant-per-unit-time estimates from net transfer counts.

    k1 = mean/T, k2 = covariance/T, k3 = third central comoment/T, with the
    standard small-sample factors; standard errors are delete-one jackknife
    over trajectories.
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if n < min_samples:
        raise InsufficientSamplesError(
            f"need at least {min_samples} trajectories, got {n}")

    s1 = x.sum(axis=0)
    s2 = np.einsum("na,nb->ab", x, x)
    s3 = np.einsum("na,nb,nc->abc", x, x, x)

    def estimates(s1_, s2_, s3_, n_):
        mu, m2, m3 = _central_moments(s1_, s2_, s3_, n_)
        k1 = mu / t_final
        k2 = m2 * n_ / (n_ - 1) / t_final
        k3 = m3 * n_ ** 2 / ((n_ - 1) * (n_ - 2)) / t_final
        return k1, k2, k3

    k1, k2, k3 = estimates(s1, s2, s3, n)

    # leave-one-out replicates, vectorised over the removed trajectory
    s1_i = s1[None, :] - x
    s2_i = s2[None, :, :] - np.einsum("na,nb->nab", x, x)
    s3_i = s3[None, :, :, :] - np.einsum("na,nb,nc->nabc", x, x, x)
    r1, r2, r3 = estimates(s1_i, s2_i, s3_i, n - 1)

    def jackknife_se(replicates):
        mean = replicates.mean(axis=0)
        return np.sqrt((n - 1) / n
                       * np.sum((replicates - mean) ** 2, axis=0))

    return EmpiricalCumulants(
        first=k1, second=k2, third=k3,
        first_se=jackknife_se(r1), second_se=jackknife_se(r2),
        third_se=jackknife_se(r3),
        n_trajectories=n, t_final=t_final,
        _replicates=(r1, r2, r3))


def spin_combination_weights(order: int, leads, kind: str = "spin") -> np.ndarray:
    """Weight tensor matching :func:`spinpump.cumulants.spin_sign_combination`."""
    from .params import LEAD_CHANNELS
    import itertools

    shape = (4,) * order
    weights = np.zeros(shape)
    for spins in itertools.product((0, 1), repeat=order):
        chs = tuple(LEAD_CHANNELS[lead][spin] for lead, spin in zip(leads, spins))
        weights[chs] += (-1) ** sum(spins) if kind == "spin" else 1.0
    return weights
