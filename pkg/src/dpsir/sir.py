"""Non-private sliced inverse regression building blocks."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSlicing, InvalidInput
from .linalg import gen_eig
from .mechanisms import BudgetLedger
from .slicing import assign_slices


@dataclass
class Dataset:
    """Design matrix and response. ``X`` is stored centered when ``centered``."""

    X: np.ndarray
    y: np.ndarray
    centered: bool = False
    mean: np.ndarray = None
    names: tuple = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y)
        if self.X.ndim != 2:
            raise InvalidInput("X must be a 2-d array")
        if self.X.shape[0] < 2:
            raise InvalidInput(f"need at least 2 observations, got {self.X.shape[0]}")
        if self.y.shape[0] != self.X.shape[0]:
            raise InvalidInput("X and y have different numbers of rows")
        if not np.all(np.isfinite(self.X)):
            raise InvalidInput("X has non-finite entries")
        if np.issubdtype(self.y.dtype, np.number) and not np.all(np.isfinite(self.y)):
            raise InvalidInput("y has non-finite entries")

    @classmethod
    def from_arrays(cls, X, y, center=True, names=None):
        X = np.asarray(X, dtype=float)
        names = None if names is None else tuple(names)
        if not center:
            return cls(X, y, names=names)
        mean = X.mean(axis=0)
        return cls(X - mean, y, centered=True, mean=mean, names=names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def coord_bound(self):
        """Largest absolute design entry, the default c_x."""
        return float(np.max(np.abs(self.X)))

    def subset(self, rows):
        return Dataset(self.X[rows], self.y[rows], centered=self.centered, mean=self.mean, names=self.names)

    def columns(self, cols):
        cols = np.asarray(cols, dtype=np.int64)
        names = None if self.names is None else tuple(self.names[i] for i in cols)
        mean = None if self.mean is None else self.mean[cols]
        return Dataset(self.X[:, cols], self.y, centered=self.centered, mean=mean, names=names)


@dataclass
class KernelPair:
    M: np.ndarray
    Sigma: np.ndarray
    slice_probs: np.ndarray
    source: str = "sample"


@dataclass
class SdrEstimate:
    """Estimated directions plus what it cost to get them.

    ``B_hat`` is p x k. ``eigenvalues`` holds the generalized eigenvalues the
    estimator produced (all of them for initializers, so DP-BIC can use
    them). ``normalized`` is set by estimators that also report a
    ``B (B'B)^{-1/2}`` version of the output.
    """

    B_hat: np.ndarray
    eigenvalues: np.ndarray
    k_selected: int
    ledger: BudgetLedger = field(default_factory=BudgetLedger)
    iterations_run: int = 0
    support: np.ndarray = None
    normalized: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)


def sample_covariance(data):
    """1/n covariance of the (centered) design."""
    X = data.X if data.centered else data.X - data.X.mean(axis=0)
    S = X.T @ X / X.shape[0]
    return 0.5 * (S + S.T)


def _centered(data):
    return data.X if data.centered else data.X - data.X.mean(axis=0)


def kernel_matrix(X, labels, H):
    """Slice-mean kernel sum_h p_h m_h m_h' and the slice frequencies."""
    n = X.shape[0]
    sums, counts = kernels.slice_sums(X, labels, H)
    live = counts > 0
    if live.sum() < 2:
        raise DegenerateSlicing("all observations fall in a single slice")
    if not live.all():
        warnings.warn(f"{int((~live).sum())} empty slice(s) contribute nothing", stacklevel=3)
    scaled = sums[live] / np.sqrt(counts[live])[:, None]
    M = scaled.T @ scaled / n
    return 0.5 * (M + M.T), counts / n


def sample_kernel(data, assignment, H):
    labels = np.asarray(assignment, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= H):
        raise InvalidInput(f"slice indices must lie in [0, {H})")
    X = _centered(data)
    M, probs = kernel_matrix(X, labels, H)
    return KernelPair(M=M, Sigma=sample_covariance(data), slice_probs=probs)


def _check_k(k, H, p):
    if not 1 <= k <= min(H - 1, p):
        raise InvalidInput(f"k must lie in [1, min(H-1, p)] = [1, {min(H - 1, p)}], got {k}")


def sir_fit(data, plan, k):
    """Classical SIR: top-k generalized eigenvectors of (M_hat, Sigma_hat)."""
    _check_k(k, plan.H, data.p)
    kp = sample_kernel(data, assign_slices(data.y, plan), plan.H)
    ged = gen_eig(kp.M, kp.Sigma, k)
    return SdrEstimate(
        B_hat=ged.vectors,
        eigenvalues=ged.spectrum[: plan.H].copy(),
        k_selected=k,
        diagnostics={"kernel": kp},
    )


def embed_rows(B_sub, rows, p):
    B = np.zeros((p, B_sub.shape[1]))
    B[np.asarray(rows)] = B_sub
    return B


def oracle_sir(data, plan, k, support):
    """SIR restricted to ``support``, embedded back with zeros elsewhere."""
    support = np.asarray(support, dtype=np.int64)
    if support.size == 0 or support.min() < 0 or support.max() >= data.p:
        raise InvalidInput("support must be a non-empty subset of the column indices")
    est = sir_fit(data.columns(support), plan, k)
    est.B_hat = embed_rows(est.B_hat, support, data.p)
    est.support = support
    return est
