import numpy as np
import pytest

from svyanova.popgen import PopulationConfig, generate_population


@pytest.fixture(scope="session")
def small_population():
    """M=60 clusters of 20 units; big enough for informative designs."""
    cfg = PopulationConfig(M=60, N_h=20, mu0=1.0, sigma_a0=2.0, sigma_eps0=3.0, seed=314)
    return generate_population(cfg)


@pytest.fixture(scope="session")
def medium_population():
    cfg = PopulationConfig(M=200, N_h=40, mu0=1.0, sigma_a0=2.0, sigma_eps0=3.0, seed=2718)
    return generate_population(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(99)
