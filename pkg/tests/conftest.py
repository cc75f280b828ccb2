import json
import os

import numpy as np
import pytest

from rbsim import RandomStream

HERE = os.path.dirname(os.path.abspath(__file__))


@pytest.fixture(scope="session")
def frozen():
    with open(os.path.join(HERE, "oracles", "frozen.json")) as fh:
        return json.load(fh)


@pytest.fixture
def stream():
    return RandomStream(20240601)


def ks2(x, y):
    """Two-sample KS distance (oracle helper, independent of rbsim.validate)."""
    x, y = np.sort(x), np.sort(y)
    z = np.concatenate([x, y])
    fx = np.searchsorted(x, z, side="right") / x.size
    fy = np.searchsorted(y, z, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))
