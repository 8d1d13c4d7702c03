import math

import numpy as np
import pytest

from reebspiral import builtin_model


@pytest.fixture(scope="session")
def heis():
    return builtin_model("heisenberg")


@pytest.fixture(scope="session")
def heis_q():
    return builtin_model("heisenberg-quotient", T0=2 * math.pi)


@pytest.fixture(scope="session")
def s3():
    return builtin_model("s3")


@pytest.fixture(scope="session")
def s3_round():
    return builtin_model("s3", aniso=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
