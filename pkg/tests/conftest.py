import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def nw_direct(z, y, u, h):
    """Nadaraya-Watson by explicit double loop with the Epanechnikov kernel."""
    out = np.empty(len(u))
    for t, ut in enumerate(u):
        num = den = 0.0
        for zi, yi in zip(z, y):
            v = (zi - ut) / h
            w = 0.75 * (1 - v * v) / h if abs(v) < 1 else 0.0
            num += w * yi
            den += w
        out[t] = num / den
    return out
