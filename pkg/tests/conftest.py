import numpy as np
import pytest

from acdisk.geometry import DiskGeometry
from acdisk.grid import PolarGrid
from acdisk.potential import PotentialSpec


@pytest.fixture(scope="session")
def quartic():
    pot = PotentialSpec.quartic()
    pot.validate()
    return pot


@pytest.fixture(scope="session")
def unit_disk():
    return DiskGeometry(1.0)


@pytest.fixture()
def small_grid():
    return PolarGrid(48, 48, 1.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240811)
