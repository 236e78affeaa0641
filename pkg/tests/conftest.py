import numpy as np
import pytest

from bosoncert import InputConfig, make_cyclic_input, make_fourier


@pytest.fixture
def beam_splitter():
    """Two-mode Fourier matrix with both inputs occupied."""
    return make_fourier(2), InputConfig((1, 2))


@pytest.fixture
def fourier3():
    return make_fourier(9), make_cyclic_input(3, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def within_sigmas(freq, p, shots, k=4.0):
    """|freq - p| <= k binomial standard errors (exact zero allowed for p = 0)."""
    sigma = np.sqrt(np.asarray(p) * (1 - np.asarray(p)) / shots)
    return np.abs(np.asarray(freq) - np.asarray(p)) <= k * sigma + 1e-15
