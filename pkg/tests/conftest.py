import numpy as np
import pytest

from wornsim import geometry as geo


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_transform(rng, from_frame="", to_frame="", span=1.0) -> geo.Transform:
    v = rng.normal(size=4)
    q = geo.quat_normalize((v[0], v[1], v[2], v[3]))
    t = rng.uniform(-span, span, 3)
    return geo.Transform(q, (t[0], t[1], t[2]), from_frame, to_frame)
