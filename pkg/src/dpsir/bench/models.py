"""Synthetic regression models used by the benchmark.

All designs are Gaussian with an AR(1) correlation 0.5^|i-j| and variance
0.25, clamped to [-1.5, 1.5]. The direction coefficients are drawn once per
dataset from the regime's uniform range:

    M1: y = b1'x + e
    M2: y = exp(b2'x) + e
    M3: y = 25 (b3'x) / (1 + (b4'x + 1)^2) + 0.1 e
    M4: y = sin(b3'x) exp(b4'x + e)

Each b_j has two non-zero leading coordinates. With ``ModelSpec.seed`` set
the coefficients are fixed by that seed and only the data vary between
calls; otherwise they are redrawn from ``rng`` on every call. ``SPIKED`` is a sparse
principal-component design x = z + sqrt(strength) g v with unit v supported
on the first ``sparsity`` coordinates; its response is pure noise.
"""

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import InvalidInput
from ..sir import Dataset

MODELS = ("M1", "M2", "M3", "M4", "SPIKED")
TRUE_DIM = {"M1": 1, "M2": 1, "M3": 2, "M4": 2, "SPIKED": 1}
COEF_RANGE = {"low": (-10.0, 10.0), "high": (-10.0, -5.0)}
AR_RHO = 0.5
DESIGN_SD = 0.5


@dataclass(frozen=True)
class ModelSpec:
    model: str
    n: int
    p: int
    regime: str = None
    seed: int = None
    coef_range: tuple = None
    truncation: float = 1.5
    strength: float = 5.0
    sparsity: int = 5

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidInput(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.n < 2 or self.p < 2:
            raise InvalidInput("n and p must both be at least 2")
        regime = self.regime or ("low" if self.n > self.p else "high")
        if regime not in COEF_RANGE:
            raise InvalidInput(f"regime must be 'low' or 'high', got {regime!r}")
        object.__setattr__(self, "regime", regime)
        lo, hi = self.coef_range or COEF_RANGE[regime]
        if not lo < hi:
            raise InvalidInput("coef_range must satisfy lo < hi")
        object.__setattr__(self, "coef_range", (float(lo), float(hi)))
        if self.model == "SPIKED" and not 1 <= self.sparsity <= self.p:
            raise InvalidInput("sparsity must lie in [1, p]")

    @property
    def k(self):
        return TRUE_DIM[self.model]

    def to_dict(self):
        return asdict(self)


def ar_design(n, p, rng, rho=AR_RHO, sd=DESIGN_SD):
    """Rows from N(0, sd^2 rho^|i-j|) via the stationary AR(1) recursion."""
    Z = rng.standard_normal((n, p))
    X = np.empty_like(Z)
    X[:, 0] = Z[:, 0]
    c = math.sqrt(1.0 - rho * rho)
    for j in range(1, p):
        X[:, j] = rho * X[:, j - 1] + c * Z[:, j]
    return sd * X


def _direction(p, mu):
    b = np.zeros(p)
    m = min(len(mu), p)
    b[:m] = mu[:m]
    return b


def generate_model(spec, rng):
    """Draw one dataset; returns ``(Dataset, B_true)`` with B_true p x k."""
    n, p = spec.n, spec.p
    if spec.model == "SPIKED":
        v = np.zeros(p)
        v[: spec.sparsity] = 1.0 / math.sqrt(spec.sparsity)
        X = rng.standard_normal((n, p)) + math.sqrt(spec.strength) * rng.standard_normal(n)[:, None] * v
        y = rng.standard_normal(n)
        return Dataset.from_arrays(X, y), v[:, None]
    lo, hi = spec.coef_range
    coef_rng = rng if spec.seed is None else np.random.default_rng(spec.seed)
    mu = coef_rng.uniform(lo, hi, 8)
    X = ar_design(n, p, rng)
    if spec.truncation is not None:
        X = np.clip(X, -spec.truncation, spec.truncation)
    e = rng.standard_normal(n)
    if spec.model == "M1":
        b = _direction(p, mu[0:2])
        y = X @ b + e
        B = b[:, None]
    elif spec.model == "M2":
        b = _direction(p, mu[2:4])
        y = np.exp(X @ b) + e
        B = b[:, None]
    else:
        b3 = _direction(p, mu[4:6])
        b4 = _direction(p, mu[6:8])
        u, w = X @ b3, X @ b4
        if spec.model == "M3":
            y = 25.0 * u / (1.0 + (w + 1.0) ** 2) + 0.1 * e
        else:
            y = np.sin(u) * np.exp(w + e)
        B = np.column_stack([b3, b4])
    return Dataset.from_arrays(X, y), B
