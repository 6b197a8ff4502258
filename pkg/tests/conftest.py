import numpy as np
import pytest

from basinlab.sphere import RationalMap


@pytest.fixture(scope="session")
def z2():
    return RationalMap([0, 0, 1], [1])


@pytest.fixture(scope="session")
def basilica():
    """The quadratic z^2 - 1 (superattracting 2-cycle 0 <-> -1)."""
    return RationalMap([-1, 0, 1], [1])


@pytest.fixture(scope="session")
def basilica2():
    """(z^2-1) o (z^2-1) = z^4 - 2z^2; 0 and -1 are superattracting fixed points."""
    return RationalMap([0, 0, -2, 0, 1], [1])


@pytest.fixture(scope="session")
def newton_cubic():
    """Newton's method for z^3 - 1: (2z^3 + 1) / (3z^2)."""
    return RationalMap.newton([-1, 0, 0, 1])


@pytest.fixture(scope="session")
def ftheta_one():
    """The circle-preserving cubic z^2(z-3)/(1-3z) with unit prefactor."""
    return RationalMap([0, 0, -3, 1], [1, -3])


@pytest.fixture()
def rng():
    # function scope: each test sees the same stream regardless of which
    # other tests ran before it
    return np.random.default_rng(20230817)
