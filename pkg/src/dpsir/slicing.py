"""Response slicing: private histogram cutoffs and categorical slices.

Continuous responses are mapped into (-1, 1) by ``(2/pi) arctan(y)``, binned
on ``m`` equal-width bins, and the bin counts are privatized with
Laplace(2/epsilon) noise. Cutoffs are the bin edges where the private CDF
first reaches h/H. Slices are half-open intervals (q_{h-1}, q_h], the first
one closed at -1.

Slice indices are 0-based throughout.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateHistogram, DegenerateSlicing, InvalidInput
from .mechanisms import PrivacyBudget, laplace_mechanism

MAX_CATEGORIES = 64
_CDF_TOL = 1e-12


@dataclass(frozen=True)
class DpHistogram:
    bin_edges: np.ndarray
    raw_counts: np.ndarray
    noised_counts: np.ndarray
    density: np.ndarray

    @property
    def m(self):
        return self.raw_counts.size

    def cdf_at_edges(self):
        """Private CDF evaluated at the right edge of every bin."""
        return np.cumsum(self.noised_counts) / self.noised_counts.sum()


@dataclass
class SlicePlan:
    """How responses map to slices.

    For continuous plans ``cutoffs`` holds q_0 = -1 < q_1 < ... < q_H = 1 on
    the transformed scale. For categorical plans ``labels`` lists the
    category of each slice.
    """

    kind: str
    H: int
    cutoffs: np.ndarray = None
    labels: tuple = None
    m: int = None
    privacy_spent: object = None
    histogram: DpHistogram = None
    counts: np.ndarray = None
    assignment: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        out = {"kind": self.kind, "H": self.H, "m": self.m}
        if self.cutoffs is not None:
            out["cutoffs"] = [float(c) for c in self.cutoffs]
        if self.labels is not None:
            out["labels"] = [str(l) for l in self.labels]
        if self.privacy_spent is not None:
            out["privacy_spent"] = self.privacy_spent.to_dict()
        if self.counts is not None:
            out["counts"] = [int(c) for c in self.counts]
        return out


def transform_response(y):
    """Map the real line into (-1, 1), strictly increasing."""
    return (2.0 / math.pi) * np.arctan(np.asarray(y, dtype=float))


def default_bins(n):
    return max(2, math.ceil(round(n ** (1.0 / 3.0), 9)))


def build_dp_histogram(y_transformed, m, budget, rng, ledger=None):
    """Equal-width histogram on [-1, 1] with Laplace(2/eps) count noise clamped at 0."""
    t = np.asarray(y_transformed, dtype=float)
    if m < 2:
        raise InvalidInput(f"need at least 2 bins, got {m}")
    if t.size and (t.min() < -1 or t.max() > 1):
        raise InvalidInput("transformed responses must lie in [-1, 1]")
    raw = kernels.bin_counts(t, m)
    noisy = laplace_mechanism(raw.astype(float), 2.0, budget, rng, ledger=ledger, label="histogram")
    d = np.maximum(noisy, 0.0)
    total = d.sum()
    if total <= 0:
        raise DegenerateHistogram("all privatized bin counts are zero")
    return DpHistogram(
        bin_edges=np.linspace(-1.0, 1.0, m + 1),
        raw_counts=raw,
        noised_counts=d,
        density=d / total * (m / 2.0),
    )


def cutoffs_from_histogram(hist, H):
    """Private quantile cutoffs at bin edges; repeated edges are merged."""
    F = hist.cdf_at_edges()
    right = hist.bin_edges[1:]
    inner = []
    for h in range(1, H):
        j = int(np.argmax(F >= h / H - _CDF_TOL))
        inner.append(right[j])
    inner = np.unique(np.asarray(inner))
    inner = inner[(inner > -1.0) & (inner < 1.0)]
    return np.concatenate(([-1.0], inner, [1.0]))


def _continuous_labels(t, cutoffs):
    return np.searchsorted(cutoffs[1:-1], t, side="left").astype(np.int64)


def _warn_sparse(counts, n):
    H = counts.size
    thin = np.flatnonzero(counts < max(2, 0.1 * n / H))
    if thin.size:
        warnings.warn(
            f"slices {thin.tolist()} hold very few observations ({counts[thin].tolist()})",
            stacklevel=3,
        )


def estimate_slices(y, H, m=None, budget=None, rng=None, ledger=None):
    """Private slice cutoffs for a continuous response.

    Charges ``(epsilon, 0)`` to ``ledger`` under the label ``"slices"``. If
    several target quantiles fall on the same bin edge they are merged, so the
    returned plan may hold fewer than ``H`` slices (a warning is issued).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if H < 2:
        raise InvalidInput(f"H must be at least 2, got {H}")
    if n < H:
        raise InvalidInput(f"need at least H={H} observations, got {n}")
    if budget is None:
        raise InvalidInput("a privacy budget is required (use INFINITE for none)")
    if m is None:
        m = default_bins(n)
    t = transform_response(y)
    hist = build_dp_histogram(t, m, budget, rng, ledger=ledger)
    if ledger is not None:
        ledger.charge("slices", PrivacyBudget(budget.epsilon, 0.0))
    cutoffs = cutoffs_from_histogram(hist, H)
    H_eff = cutoffs.size - 1
    if H_eff < 2:
        raise DegenerateSlicing("private histogram put every quantile on one edge")
    if H_eff < H:
        warnings.warn(f"merged coincident cutoffs: {H} requested slices became {H_eff}", stacklevel=2)
    labels = _continuous_labels(t, cutoffs)
    counts = np.bincount(labels, minlength=H_eff)
    _warn_sparse(counts, n)
    return SlicePlan(
        kind="continuous",
        H=H_eff,
        cutoffs=cutoffs,
        m=m,
        privacy_spent=PrivacyBudget(budget.epsilon, 0.0),
        histogram=hist,
        counts=counts,
        assignment=labels,
    )


def categorical_slices(y):
    """One slice per distinct label; uses no privacy budget."""
    y = np.asarray(y)
    labels, inverse, counts = np.unique(y, return_inverse=True, return_counts=True)
    if labels.size > MAX_CATEGORIES:
        raise InvalidInput(f"{labels.size} distinct labels exceed the cap of {MAX_CATEGORIES}")
    if labels.size < 2:
        raise InvalidInput("a categorical response needs at least two distinct labels")
    return SlicePlan(
        kind="categorical",
        H=int(labels.size),
        labels=tuple(labels.tolist()),
        counts=counts.astype(np.int64),
        assignment=inverse.astype(np.int64).ravel(),
    )


def is_categorical(y):
    """Non-numeric responses with at most ``MAX_CATEGORIES`` labels take the categorical path."""
    y = np.asarray(y)
    if np.issubdtype(y.dtype, np.number):
        return False
    return np.unique(y).size <= MAX_CATEGORIES


def make_slices(y, H, m=None, budget=None, rng=None, ledger=None):
    if is_categorical(y):
        return categorical_slices(y)
    return estimate_slices(y, H, m=m, budget=budget, rng=rng, ledger=ledger)


def assign_slices(y, plan):
    """Slice index (0-based) of every observation under ``plan``."""
    if plan.kind == "categorical":
        index = {label: i for i, label in enumerate(plan.labels)}
        try:
            return np.array([index[v] for v in np.asarray(y).tolist()], dtype=np.int64)
        except KeyError as exc:
            raise InvalidInput(f"label {exc.args[0]!r} is not in the slice plan") from None
    return _continuous_labels(transform_response(y), plan.cutoffs)
