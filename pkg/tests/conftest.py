import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_conv_case(rng, *, groups=1, dilation=1, stride=1, max_dim=9):
    """Random small conv instance with consistent shapes."""
    n = int(rng.integers(1, 3))
    g = groups
    cpg = int(rng.integers(1, 4))
    opg = int(rng.integers(1, 4))
    c_in, c_out = g * cpg, g * opg
    kh = int(rng.choice([1, 3]))
    kw = int(rng.choice([1, 3]))
    pad = int(rng.integers(0, 3)) + (dilation if dilation > 1 else 0)
    h = int(rng.integers(max(3, dilation * (kh - 1) + 1), max_dim + 1))
    w = int(rng.integers(max(3, dilation * (kw - 1) + 1), max_dim + 1))
    x = rng.normal(size=(n, c_in, h, w))
    weight = rng.normal(size=(c_out, cpg, kh, kw))
    bias = rng.normal(size=c_out)
    return x, weight, bias, (kh, kw), stride, pad, dilation, g
