import numpy as np
import pytest

from chaos_mm import ModelParams, Quadratic


@pytest.fixture
def market_params():
    """Coupled-oscillator setup used throughout: x_0=3, k_x=0.11, k_v=0.1,
    unit inertias, risk aversion 0.01 unless a test overrides it."""
    return ModelParams.static_risk(k_x=0.11, x_0=3.0, epsilon=0.01,
                                   inventory_potential=Quadratic(0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


def random_static_params(rng):
    return ModelParams.static_risk(
        m_x=0.5 + rng.random(),
        m_v=0.5 + rng.random(),
        k_x=0.05 + rng.random(),
        x_0=rng.normal(scale=2.0),
        epsilon=0.2 * rng.random(),
        inventory_potential=Quadratic(0.05 + rng.random()),
    )
