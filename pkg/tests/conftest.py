import functools

import numpy as np
import pytest
from hypothesis import settings as hyp_settings

from chattering.dynamics import ModelParams
from chattering.integrator import IntegratorSettings

hyp_settings.register_profile("default", deadline=None, max_examples=40)
hyp_settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def reference_shot(delta=10.0, precision=1e-3):
    """Shooting from (0, 1, 0); shared by several modules, computed once per session."""
    from chattering.synthesis import shoot

    return shoot((0.0, 1.0, 0.0), precision, ModelParams(delta), IntegratorSettings())


@pytest.fixture(scope="session")
def shot():
    return reference_shot()


@pytest.fixture
def params():
    return ModelParams(10.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
