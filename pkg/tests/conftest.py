import numpy as np
import pytest

from impulseflow import IntegratorConfig, build_fixture


@pytest.fixture(scope="session")
def annulus():
    return build_fixture("annulus")


@pytest.fixture(scope="session")
def prey_predator():
    return build_fixture("prey_predator")


@pytest.fixture(scope="session")
def doubling():
    return build_fixture("doubling_suspension")


@pytest.fixture(scope="session")
def cfg():
    return IntegratorConfig()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def polar(r, theta):
    return np.array([r * np.cos(theta), r * np.sin(theta)])
