import numpy as np
import pytest

from uwbcorr.geometry import eval_meta_guard


@pytest.fixture(autouse=True)
def _disarm_guard():
    """Keep the ground-truth tripwire disarmed unless a test arms it."""
    eval_meta_guard.armed = False
    yield
    eval_meta_guard.armed = False


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
