import numpy as np
import pytest

from levyou.models import GaussParams, OuProcessSpec
from levyou.sampler import clear_cache

from tables import DT, make_spec


@pytest.fixture
def gauss_spec():
    # unit driver volatility, b = 0.1
    return OuProcessSpec("OU-GAUSS", 0.1, GaussParams(1.0))


@pytest.fixture
def dt():
    return DT


@pytest.fixture
def spec_of():
    return make_spec


@pytest.fixture
def real_mesh():
    return np.concatenate([-np.logspace(-3, 2.5, 40)[::-1], [0.0], np.logspace(-3, 2.5, 40)])


@pytest.fixture(autouse=True, scope="module")
def _fresh_cache():
    clear_cache()
    yield
    clear_cache()
