"""Shared fixtures. Simulated matrices are session-scoped because the
time-domain simulation dominates suite runtime."""

import numpy as np
import pytest

from smcal.core import (
    ParticleModel,
    grid_1d,
    grid_2d,
    sequence_1d,
    sequence_2d,
)
from smcal import physics, sampling


@pytest.fixture(scope="session")
def particle():
    return ParticleModel(m_sat=1.0, beta=2000.0)


@pytest.fixture(scope="session")
def seq1d():
    return sequence_1d()


@pytest.fixture(scope="session")
def seq2d():
    return sequence_2d()


@pytest.fixture(scope="session")
def grid33():
    return grid_1d(33, 0.02)


@pytest.fixture(scope="session")
def grid17sq():
    return grid_2d(17, 17, 0.02, 0.02)


@pytest.fixture(scope="session")
def sm1d(seq1d, particle, grid33):
    """1D SM, 33 voxels, harmonics 2..10."""
    return physics.simulate_system_matrix(seq1d, particle, grid33, ["x"], range(2, 11))


@pytest.fixture(scope="session")
def sm2d(seq2d, particle, grid17sq):
    """2D SM, 17x17 voxels, both channels, harmonics 16..165."""
    return physics.simulate_system_matrix(
        seq2d, particle, grid17sq, ["x", "y"], range(16, 166))


@pytest.fixture(scope="session")
def benchmark_sm():
    """The 37x37 learnable benchmark matrix used by the SR experiments.

    beta is moderate so low-order intermodulation dominates and the rows
    are smooth enough for super-resolution to be meaningful.
    """
    from smcal.cli import benchmark_setup

    seq, pm, grid, channels, ks = benchmark_setup()
    return physics.simulate_system_matrix(seq, pm, grid, channels, ks)


@pytest.fixture(scope="session")
def benchmark_pairs_2x(benchmark_sm):
    padded = sampling.zero_pad(benchmark_sm)
    return sampling.split_pairs(sampling.make_pairs(padded, 2), seed=0)


def rng(seed=0):
    return np.random.default_rng(seed)
