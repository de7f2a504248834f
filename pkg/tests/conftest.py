import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_low_T_warning(caplog):
    caplog.set_level(logging.ERROR, logger="threshreg.rkhs")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
