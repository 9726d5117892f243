import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from radonrange.geometry import PlaneChart

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def random_plane(rng, n, p, sigma_scale=1.0):
    k = n - p
    while True:
        tau = rng.standard_normal((k, n))
        if np.linalg.cond(tau) < 50:
            return PlaneChart(rng.uniform(-sigma_scale, sigma_scale, k), tau)


def random_mu(rng, k, cond_max=20.0):
    while True:
        mu = rng.standard_normal((k, k))
        if np.linalg.cond(mu) < cond_max:
            return mu


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
