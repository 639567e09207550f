import numpy as np
import pytest

from fewmode import double_delta, ley_loudon_cavity, wall_mirror


@pytest.fixture(scope="session")
def dd():
    return double_delta(10.0)


@pytest.fixture(scope="session")
def thin():
    return ley_loudon_cavity(0.19)


@pytest.fixture(scope="session")
def wall():
    return wall_mirror(5.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
