"""Differential-privacy primitives and budget accounting.

All mechanisms take an explicit ``numpy.random.Generator``; identical
generator state gives bit-identical output. A budget with infinite epsilon
disables noise entirely, which turns every private estimator into its
non-private counterpart.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BudgetExceeded, InvalidInput

_REL_TOL = 1e-12


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        eps = float(self.epsilon)
        if math.isnan(eps) or eps <= 0:
            raise InvalidInput(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidInput(f"delta must lie in [0, 1), got {self.delta}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "delta", float(self.delta))

    @classmethod
    def infinite(cls):
        return cls(math.inf, 0.0)

    @property
    def is_infinite(self):
        return math.isinf(self.epsilon)

    def scaled(self, factor):
        """Budget with both epsilon and delta multiplied by ``factor``."""
        return PrivacyBudget(self.epsilon * factor, self.delta * factor)

    def to_dict(self):
        return {"epsilon": None if self.is_infinite else self.epsilon, "delta": self.delta}

    @classmethod
    def from_dict(cls, d):
        eps = d.get("epsilon")
        return cls(math.inf if eps is None else eps, d.get("delta", 0.0))


INFINITE = PrivacyBudget.infinite()


@dataclass(frozen=True)
class NoiseSpec:
    """Record of one noise draw: distribution, scale and what it protected.

    ``scale`` is the Laplace scale b or the Gaussian standard deviation.
    """

    distribution: str
    scale: float
    label: str = ""

    def __post_init__(self):
        if self.distribution not in ("laplace", "gaussian"):
            raise InvalidInput(f"unknown distribution {self.distribution!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidInput(f"noise scale must be positive and finite, got {self.scale}")


@dataclass
class BudgetLedger:
    """Basic-composition accountant.

    ``charge`` appends a (label, epsilon, delta) entry; totals are plain sums.
    If ``cap`` is set, a charge that would push the total past it raises
    ``BudgetExceeded`` and is not recorded.
    """

    cap: PrivacyBudget = None
    entries: list = field(default_factory=list)
    noise: list = field(default_factory=list)

    def charge(self, label, budget):
        if budget.is_infinite:
            self.entries.append((label, math.inf, 0.0))
            return
        if self.cap is not None and not self.cap.is_infinite:
            eps = math.fsum([e for _, e, _ in self.entries] + [budget.epsilon])
            dlt = math.fsum([d for _, _, d in self.entries] + [budget.delta])
            if eps > self.cap.epsilon * (1 + _REL_TOL) or dlt > self.cap.delta * (1 + _REL_TOL):
                raise BudgetExceeded(
                    f"charging {label!r} ({budget.epsilon}, {budget.delta}) exceeds cap "
                    f"({self.cap.epsilon}, {self.cap.delta})"
                )
        self.entries.append((label, budget.epsilon, budget.delta))

    def record(self, spec):
        self.noise.append(spec)

    def extend(self, other):
        for label, eps, dlt in other.entries:
            self.charge(label, PrivacyBudget(eps, dlt))
        self.noise.extend(other.noise)

    @property
    def epsilon(self):
        return math.fsum(e for _, e, _ in self.entries)

    @property
    def delta(self):
        return math.fsum(d for _, _, d in self.entries)

    def total(self):
        """``(epsilon, delta)`` summed over every charge."""
        return self.epsilon, self.delta

    def to_dict(self):
        def num(x):
            return None if math.isinf(x) else x

        return {
            "entries": [{"label": l, "epsilon": num(e), "delta": d} for l, e, d in self.entries],
            "epsilon": num(self.epsilon),
            "delta": self.delta,
        }


def merge_ledgers(*ledgers, shared=("slices",)):
    """Concatenate ledgers of a pipeline; charges labelled in ``shared`` count once."""
    out = BudgetLedger()
    seen = set()
    for led in ledgers:
        for label, eps, dlt in led.entries:
            if label in shared:
                if label in seen:
                    continue
                seen.add(label)
            out.entries.append((label, eps, dlt))
        out.noise.extend(led.noise)
    return out


def laplace_scale(l1_sensitivity, epsilon):
    return l1_sensitivity / epsilon


def gaussian_sd(l2_sensitivity, budget):
    """Standard deviation of the classical Gaussian mechanism."""
    return math.sqrt(2.0 * math.log(1.25 / budget.delta)) * l2_sensitivity / budget.epsilon


def sample_laplace(rng, scale, size):
    """Laplace draws by inverse CDF from the generator's uniform stream."""
    u = rng.random(size) - 0.5
    a = np.minimum(np.abs(u), 0.5 - 2.0**-54)
    return -scale * np.sign(u) * np.log1p(-2.0 * a)


def sample_gaussian(rng, sd, size):
    return sd * rng.standard_normal(size)


def symmetric_gaussian(rng, sd, p):
    """Symmetric p x p matrix whose upper triangle (diagonal included) is iid N(0, sd^2)."""
    W = np.triu(rng.standard_normal((p, p)) * sd)
    return W + np.triu(W, 1).T


def _check_sensitivity(s):
    if not (s > 0 and math.isfinite(s)):
        raise InvalidInput(f"sensitivity must be positive and finite, got {s}")


def laplace_mechanism(values, l1_sensitivity, budget, rng, ledger=None, label="laplace"):
    """Add iid Laplace(l1_sensitivity / epsilon) noise; ``budget.delta`` is ignored."""
    _check_sensitivity(l1_sensitivity)
    values = np.asarray(values, dtype=float)
    if budget.is_infinite:
        return values.copy()
    b = laplace_scale(l1_sensitivity, budget.epsilon)
    if ledger is not None:
        ledger.record(NoiseSpec("laplace", b, label))
    return values + sample_laplace(rng, b, values.shape)


def gaussian_mechanism(values, l2_sensitivity, budget, rng, ledger=None, label="gaussian"):
    """Add iid N(0, s^2) noise with s = sqrt(2 log(1.25/delta)) * l2_sensitivity / epsilon."""
    _check_sensitivity(l2_sensitivity)
    values = np.asarray(values, dtype=float)
    if budget.is_infinite:
        return values.copy()
    if budget.delta <= 0:
        raise InvalidInput("the Gaussian mechanism requires delta > 0")
    sd = gaussian_sd(l2_sensitivity, budget)
    if ledger is not None:
        ledger.record(NoiseSpec("gaussian", sd, label))
    return values + sample_gaussian(rng, sd, values.shape)


def peeling_scales(sigma, d1, s_prime, budget):
    """(Laplace selection scale, Gaussian release sd) of matrix peeling."""
    eps, dlt = budget.epsilon, budget.delta
    lap = sigma * 2.0 * math.sqrt(3.0 * d1 * s_prime * math.log(2.0 / dlt)) / eps
    gau = sigma * 2.0 * math.sqrt(2.0 * d1 * s_prime * math.log(2.5 / dlt)) / eps
    return lap, gau


def peel_top_columns(A, s_prime, budget, sigma, rng, ledger=None, label="peel"):
    """Matrix noisy hard thresholding.

    Selects ``s_prime`` columns of the d1 x d2 matrix ``A`` one at a time by
    the largest noisy column norm, then releases those columns with Gaussian
    noise. ``sigma`` must dominate the entrywise sensitivity of ``A``.
    The Gaussian scale is a standard deviation,
    ``sigma * 2 * sqrt(2 d1 s_prime log(2.5/delta)) / eps``.

    Returns ``(S, A_S)``: the selected indices in selection order and the
    noised d1 x s_prime submatrix. With an infinite budget the selection is
    the exact top ``s_prime`` by norm (lowest index on ties) and no noise is
    added.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[None, :]
    d1, d2 = A.shape
    if not 1 <= s_prime <= d2:
        raise InvalidInput(f"s_prime must lie in [1, {d2}], got {s_prime}")
    norms = np.linalg.norm(A, axis=0)
    if budget.is_infinite:
        S = kernels.peel_select(norms, np.zeros((s_prime, d2)))
        return S, A[:, S].copy()
    if not sigma > 0:
        raise InvalidInput("sigma must be positive")
    if budget.delta <= 0:
        raise InvalidInput("peeling requires delta > 0")
    lap, gau = peeling_scales(sigma, d1, s_prime, budget)
    w = sample_laplace(rng, lap, (s_prime, d2))
    S = kernels.peel_select(norms, w)
    release = A[:, S] + sample_gaussian(rng, gau, (d1, s_prime))
    if ledger is not None:
        ledger.record(NoiseSpec("laplace", lap, f"{label}:select"))
        ledger.record(NoiseSpec("gaussian", gau, f"{label}:release"))
    return S, release


def exponential_select(scores, sensitivity, epsilon, rng):
    """Sample index i with probability proportional to exp(eps * score_i / (2 * sensitivity))."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise InvalidInput("no candidates to select from")
    if not np.all(np.isfinite(scores)):
        raise InvalidInput("scores must be finite")
    _check_sensitivity(sensitivity)
    if math.isinf(epsilon):
        return int(np.argmax(scores))
    logits = epsilon * scores / (2.0 * sensitivity)
    prob = np.exp(logits - logits.max())
    cdf = np.cumsum(prob)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), scores.size - 1))
