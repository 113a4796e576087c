import warnings

import numpy as np
import pytest

from landaukit.diagnostics import TruncationWarning, maxwellian
from landaukit.grid import VelocityGrid


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running solver checks")


@pytest.fixture
def grid16():
    return VelocityGrid(3, 16, 7.0)


@pytest.fixture
def grid32():
    return VelocityGrid(3, 32, 8.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def quiet_maxwellian(rho, u, T, grid):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return maxwellian(rho, u, T, grid)
