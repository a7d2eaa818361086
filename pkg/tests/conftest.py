import math

import numpy as np
import pytest


def half_integer_k(n, z):
    """K_{n+1/2}(z) from the terminating closed form (independent of the Temme/CF2 path)."""
    z = np.asarray(z, dtype=float)
    total = np.zeros_like(z)
    for k in range(n + 1):
        coef = math.factorial(n + k) / (math.factorial(k) * math.factorial(n - k))
        total = total + coef / (2.0 * z) ** k
    return np.sqrt(np.pi / (2.0 * z)) * np.exp(-z) * total


def matern_half_integer(nu, phi, r):
    """Matérn closed forms for nu in {1/2, 3/2, 5/2} in the 2 sqrt(nu) phi r scaling."""
    z = 2.0 * math.sqrt(nu) * phi * np.asarray(r, dtype=float)
    if nu == 0.5:
        return np.exp(-z)
    if nu == 1.5:
        return (1.0 + z) * np.exp(-z)
    if nu == 2.5:
        return (1.0 + z + z**2 / 3.0) * np.exp(-z)
    raise ValueError(nu)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
