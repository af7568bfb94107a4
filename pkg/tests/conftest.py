import numpy as np
import pytest

from skeldyn.gallery import build_linear, build_nonlinear
from skeldyn.transfer import build_ulam, invariant_density


@pytest.fixture(scope="session")
def linear():
    return build_linear(1, 101, 1)


@pytest.fixture(scope="session")
def nonlinear():
    return build_nonlinear()


@pytest.fixture(scope="session")
def linear_ulam(linear):
    op = build_ulam(linear.system, 64, 64, 200, seed=7)
    return op, invariant_density(op)


@pytest.fixture(scope="session")
def nonlinear_ulam(nonlinear):
    op = build_ulam(nonlinear.system, 64, 64, 200, seed=7)
    return op, invariant_density(op)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
