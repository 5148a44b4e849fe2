import math

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(rng, d):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


INTERIOR_THETAS = np.linspace(0.25, 2.9, 9)
INTERIOR_PHIS = np.linspace(0.2, 6.0, 9)
GRID_9 = [(t, p) for t in INTERIOR_THETAS for p in INTERIOR_PHIS]
GRID_5 = [(t, p) for t in np.linspace(0.25, 2.9, 5) for p in np.linspace(0.2, 6.0, 5)]
HALF_PI = math.pi / 2
