import numpy as np
import pytest

from stochastic_csvac.core.circuits import CsvacConfig
from stochastic_csvac.core.powerfit import builtin_fit


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def sim_fit():
    return builtin_fit('simulation')


@pytest.fixture
def entity_fit():
    return builtin_fit('entity')


@pytest.fixture
def csvac_cfg():
    return CsvacConfig()
