import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("quantvol", deadline=None, max_examples=60)
settings.load_profile("quantvol")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte-Carlo checks that take minutes")
