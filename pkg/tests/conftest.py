import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_density_matrix(rng, n_max, rank=None):
    rank = n_max if rank is None else rank
    factor = rng.normal(size=(n_max, rank)) + 1j * rng.normal(size=(n_max, rank))
    rho = factor @ factor.conj().T
    return rho / np.trace(rho)


def random_ket(rng, n_max):
    ket = rng.normal(size=n_max) + 1j * rng.normal(size=n_max)
    return ket / np.linalg.norm(ket)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
