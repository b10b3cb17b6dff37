import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_twists(rng, n, theta_max=3.0, rho_max=2.0, theta_min=0.0):
    """Twists with rotation norm uniform in (theta_min, theta_max)."""
    axis = rng.normal(size=(n, 3))
    axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
    mag = rng.uniform(theta_min, theta_max, size=(n, 1))
    rho = rng.uniform(-rho_max, rho_max, size=(n, 3))
    return np.concatenate([axis * mag, rho], axis=-1)
