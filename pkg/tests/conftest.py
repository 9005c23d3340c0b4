import numpy as np
import pytest

from gblab.lattice import (
    SpacetimeSpectrum,
    SpectralField,
    make_lattice,
    make_tau_grid,
)


def random_field(lattice, rng, scale=1.0, real_physical=False):
    c = rng.standard_normal(lattice.modes) + 1j * rng.standard_normal(lattice.modes)
    if real_physical:
        c = (c + np.conj(c[::-1])) / 2.0
    return SpectralField(lattice, scale * c)


def random_spectrum(lattice, tau, rng, k_decay=0.0, mod_decay=0.0):
    k = lattice.k
    mod = np.sqrt(1.0 + (tau[:, None] + (k * k)[None, :]) ** 2)
    env = (1.0 + k**2) ** (-k_decay / 2.0) * mod ** (-mod_decay)
    shape = (tau.size, lattice.modes)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return SpacetimeSpectrum(lattice, tau, env * c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_lattice():
    return make_lattice(1.0, 8.0)


@pytest.fixture
def small_spectrum_grid():
    return make_tau_grid(40.0, 0.5)
