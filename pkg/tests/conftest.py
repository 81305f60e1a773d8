import numpy as np
import pytest

from hcpfactor.platform import make_platform


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def two_level():
    return make_platform([(2, 2), (2, 2)])


@pytest.fixture
def three_level():
    return make_platform([(2, 2), (2, 2), (2, 2)])
