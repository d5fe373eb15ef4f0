import numpy as np
import pytest

from dpsir.bench.models import ModelSpec, generate_model
from dpsir.slicing import estimate_slices
from dpsir.mechanisms import INFINITE


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, p, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    w = np.geomspace(1.0, cond, p)
    return (Q * w) @ Q.T


def random_sym(rng, p):
    A = rng.standard_normal((p, p))
    return 0.5 * (A + A.T)


@pytest.fixture
def m1_data():
    """Moderate M1 sample with exact slices, shared by estimator tests."""
    rng = np.random.default_rng(7)
    data, B = generate_model(ModelSpec("M1", 20000, 8, seed=3), rng)
    plan = estimate_slices(data.y, 10, budget=INFINITE)
    return data, B, plan
