import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sparse(rng, size=12, top=40, scale=1.0):
    from fhcvec.core import SparseVec
    idx = rng.choice(top, size=size, replace=False)
    vals = scale * (rng.normal(size=size) + 1j * rng.normal(size=size))
    return SparseVec(idx, vals)
