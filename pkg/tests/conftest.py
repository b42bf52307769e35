import numpy as np
import pytest

from pds.core.rng import RngStream
from pds.models.masks import PixelMask, Preconditioner, SpectralMask
from pds.services.oracles import (
    DiagonalCovariance,
    FrequencyDiagonalCovariance,
    GaussianTarget,
    IsotropicCovariance,
    power_law_spectrum,
)
from pds.services.verification import random_preconditioner


@pytest.fixture
def rng():
    return RngStream(1234, 0)


@pytest.fixture
def shape():
    return (3, 8, 8)


@pytest.fixture
def preconditioner(shape, rng):
    return random_preconditioner(shape, rng.child(99))


@pytest.fixture
def identity_preconditioner(shape):
    ones = np.ones(shape)
    return Preconditioner(SpectralMask(ones), PixelMask(ones))


@pytest.fixture
def isotropic_target():
    return GaussianTarget(0.5, IsotropicCovariance((1, 4, 4), 2.0))


@pytest.fixture
def diagonal_target():
    return GaussianTarget(-0.2, DiagonalCovariance(np.geomspace(0.1, 3.0, 16).reshape(1, 4, 4)))


@pytest.fixture
def frequency_target():
    return GaussianTarget(0.0, FrequencyDiagonalCovariance(power_law_spectrum((1, 4, 4), 50.0)))


class StubNoise:
    """Returns the same pre-set draw on every call."""

    def __init__(self, z):
        self.z = np.asarray(z, dtype=np.float64)
        self.calls = 0

    def normal(self, shape):
        self.calls += 1
        return np.broadcast_to(self.z, tuple(shape)).copy()


@pytest.fixture
def stub_noise():
    return StubNoise
