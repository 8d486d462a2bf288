import numpy as np
import pytest

from stable_bicycle.vehicle import HATCHBACK_PARAMS, SUV_PARAMS


@pytest.fixture
def params():
    """Simulation prototype parameters used throughout the experiments."""
    return HATCHBACK_PARAMS


@pytest.fixture
def suv_params():
    return SUV_PARAMS


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
