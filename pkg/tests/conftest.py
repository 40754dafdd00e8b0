import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("thinfsi", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("thinfsi")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
