import math

import numpy as np
import pytest

from fracquant.measures import (MixtureMeasure, UniformDensity, cantor_measure, dirac,
                                sierpinski_tetraeder)

CANTOR_DIM = math.log(2) / math.log(3)
TETRA_P = (0.66, 0.2, 0.08, 0.06)


def tetra_beta(q, p=TETRA_P):
    """Closed-form spectrum of the tetraeder measure: log2 sum p_i^q."""
    return math.log2(sum(x ** q for x in p))


def half_mixture(samples=200_000):
    """Cantor measure on (0, 1/2] and Lebesgue on (1/2, 1] with equal weights."""
    left = cantor_measure(0.0, 0.5, samples=samples)
    right = UniformDensity(1, box=([0.5], [1.0]))
    return MixtureMeasure([0.5, 0.5], [left, right])


@pytest.fixture(scope="session")
def uniform1():
    return UniformDensity(1)


@pytest.fixture(scope="session")
def tetra():
    return sierpinski_tetraeder()


@pytest.fixture(scope="session")
def cantor():
    return cantor_measure(samples=200_000)


@pytest.fixture(scope="session")
def point_mass():
    return dirac(0.3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
