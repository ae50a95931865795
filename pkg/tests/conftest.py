import numpy as np
import pytest

from branchgrid import make_coil_maps, make_phantom


@pytest.fixture(scope="session")
def phantom64():
    return make_phantom(64, 64, seed=0)


@pytest.fixture(scope="session")
def maps64():
    return make_coil_maps(4, 64, 64, seed=0)


@pytest.fixture(scope="session")
def smooth64(phantom64):
    """Low-passed variant of the seeded phantom for interpolation tests."""
    from scipy.ndimage import gaussian_filter

    x = gaussian_filter(phantom64.real, 2.5) + 1j * gaussian_filter(phantom64.imag, 2.5)
    return x / np.abs(x).max()


def random_complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)
