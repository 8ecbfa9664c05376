import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

RUN_SLOW = os.environ.get("NBSC_SLOW") == "1"


def pytest_collection_modifyitems(config, items):
    if RUN_SLOW:
        return
    skip = pytest.mark.skip(reason="long-running; set NBSC_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_ccdf(rng, n, m, upper=None):
    x = np.sort(rng.random((n, m)), axis=1)[:, ::-1]
    return x if upper is None else x * upper
