"""Differentially private SIR for n > p.

Pipeline: private slices -> perturbed-pencil initializer (which also yields
the private generalized eigenvalues used by DP-BIC) -> one pass of truncated,
noisy, projected gradient descent over T disjoint folds.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .errors import DegenerateSpectrum, InvalidInput, SingularCovariance
from .linalg import gen_eig, projection_distance
from .mechanisms import (
    BudgetLedger,
    NoiseSpec,
    PrivacyBudget,
    sample_gaussian,
    symmetric_gaussian,
)
from .sir import SdrEstimate, _centered, sample_kernel
from .slicing import assign_slices, estimate_slices


# --- penalized objective -----------------------------------------------------


def gev_objective(B, M, Sigma, penalty):
    """``-tr(B'MB) + penalty * ||B' Sigma B - I||_F^2``."""
    G = B.T @ Sigma @ B - np.eye(B.shape[1])
    return -np.trace(B.T @ M @ B) + penalty * np.sum(G * G)


def gev_gradient(B, M, Sigma, penalty):
    """Exact gradient of :func:`gev_objective` (M and Sigma symmetric)."""
    G = B.T @ Sigma @ B - np.eye(B.shape[1])
    return -2.0 * M @ B + 4.0 * penalty * Sigma @ B @ G


def update_direction(B, M, Sigma, penalty):
    """Untruncated form of the fold update: ``-MB + penalty * Sigma B (B'Sigma B - I)``.

    The iterate moves by ``-2 eta`` times this, which is ``-eta`` times the
    exact gradient at half the penalty.
    """
    G = B.T @ Sigma @ B - np.eye(B.shape[1])
    return -M @ B + penalty * Sigma @ B @ G


def project_columns(B, C):
    """Scale every column with l2 norm above ``C`` back onto the ball of radius C."""
    norms = np.linalg.norm(B, axis=0)
    scale = np.where(norms > C, C / np.maximum(norms, 1e-300), 1.0)
    return B * scale


# --- noise calibration -------------------------------------------------------


def init_sigmas(p, n, c_x):
    """Smallest sensitivities for the covariance and kernel perturbations."""
    return 2.0 * p * c_x**2 / n, 7.0 * p * c_x**2 / n


def pencil_noise_sd(sigma, budget):
    """Entrywise sd of the symmetric perturbation: sigma * sqrt(8 log(2.5/delta)) / epsilon."""
    return sigma * math.sqrt(8.0 * math.log(2.5 / budget.delta)) / budget.epsilon


def sgd_sigma(eta, R, c_x, penalty, k, p, T, n):
    """Per-step sensitivity bound of the low-dimensional gradient pass."""
    return 2.0 * eta * (7 * R * c_x + penalty * (2 * R * c_x + 4 * k * R**3 * c_x)) * math.sqrt(p * k) * T / n


def sgd_noise_sd(sigma, T, budget):
    """sd of the per-step Gaussian noise: sqrt(2 sigma^2 T^2 log(1.25 T/delta)) / epsilon."""
    return math.sqrt(2.0 * sigma**2 * T**2 * math.log(1.25 * T / budget.delta)) / budget.epsilon


# --- dimension selection -----------------------------------------------------


def dp_bic_select(eigenvalues, n, C_n, H=None):
    """Maximizer of G(l) = n * sum_{i<=l} lam_i^2 / sum_{i<=H} lam_i^2 - C_n * l(l+1)/2."""
    lam = np.asarray(eigenvalues, dtype=float)
    if H is not None:
        lam = lam[:H]
    sq = lam**2
    total = sq.sum()
    if total <= 0:
        raise DegenerateSpectrum("all eigenvalues are zero")
    l = np.arange(1, lam.size + 1)
    G = n * np.cumsum(sq) / total - C_n * l * (l + 1) / 2.0
    return int(np.argmax(G)) + 1


def default_c_n(n, p, lambda_hat, budget):
    """BIC penalty: geometric mean of the two admissible growth boundaries."""
    priv = 0.0
    if not budget.is_infinite:
        priv = p**3 * math.log(1.0 / budget.delta) / (n * budget.epsilon**2)
    lam2 = max(float(lambda_hat) ** 2, 1e-300)
    c_n = math.sqrt(n * (p + priv) / lam2)
    return min(max(c_n, 1.0), max(n / 10.0, 1.0))


# --- initializer ------------------------------------------------------------


def perturb_pencil(M, Sigma, budget, sigma1, sigma2, rng, ledger, prefix=""):
    """Add symmetric Gaussian noise to (Sigma, M); charges (eps/2, delta/2) for each."""
    p = M.shape[0]
    half = budget.scaled(0.5)
    ledger.charge(f"{prefix}covariance_release", half)
    ledger.charge(f"{prefix}kernel_release", half)
    if budget.is_infinite:
        return Sigma.copy(), M.copy()
    sd1 = pencil_noise_sd(sigma1, budget)
    sd2 = pencil_noise_sd(sigma2, budget)
    ledger.record(NoiseSpec("gaussian", sd1, f"{prefix}covariance_release"))
    ledger.record(NoiseSpec("gaussian", sd2, f"{prefix}kernel_release"))
    E1 = symmetric_gaussian(rng, sd1, p)
    E2 = symmetric_gaussian(rng, sd2, p)
    return Sigma + E1, M + E2


def private_ged(M, Sigma, budget, sigma1, sigma2, rng, ledger, k, n, H, prefix="", retries=1):
    """Generalized eigenproblem of the perturbed pencil, retrying on an indefinite Sigma.

    Each retry is a fresh release and is charged again. ``k="auto"`` selects
    the dimension by DP-BIC on the private spectrum.
    """
    last = None
    for attempt in range(retries + 1):
        tag = prefix if attempt == 0 else f"{prefix}retry{attempt}:"
        S_t, M_t = perturb_pencil(M, Sigma, budget, sigma1, sigma2, rng, ledger, tag)
        try:
            full = gen_eig(M_t, S_t, M.shape[0])
        except SingularCovariance as exc:
            last = exc
            continue
        spectrum = full.spectrum[:H].copy()
        if k == "auto":
            lam = np.maximum(spectrum, 0.0)
            c_n = default_c_n(n, M.shape[0], lam[0], budget)
            k_sel = dp_bic_select(lam, n, c_n, H)
            k_sel = min(k_sel, H - 1, M.shape[0])
        else:
            k_sel = int(k)
        return full.vectors[:, :k_sel].copy(), spectrum, k_sel, (M_t, S_t)
    raise SingularCovariance(f"perturbed covariance was not positive definite after {retries + 1} draws") from last


def dpsir_init(data, plan, k, budget, rng, sigma1=None, sigma2=None, c_x=None, retries=1):
    """Perturbed-pencil initial estimate.

    Adds symmetric Gaussian noise to the sample covariance and kernel matrix
    and solves the generalized eigenproblem of the noisy pair. Returns the
    top-k directions and the leading H private eigenvalues. ``k`` may be
    ``"auto"`` to pick the dimension by DP-BIC. The ledger holds the slice
    charge of ``plan`` plus (eps, delta) for the two releases.
    """
    if k != "auto" and not 1 <= k <= min(plan.H - 1, data.p):
        raise InvalidInput(f"k must lie in [1, {min(plan.H - 1, data.p)}]")
    if c_x is None:
        c_x = data.coord_bound
    d1, d2 = init_sigmas(data.p, data.n, c_x)
    sigma1 = d1 if sigma1 is None else sigma1
    sigma2 = d2 if sigma2 is None else sigma2
    ledger = BudgetLedger()
    if plan.privacy_spent is not None:
        ledger.charge("slices", plan.privacy_spent)
    kp = sample_kernel(data, assign_slices(data.y, plan), plan.H)
    B, spectrum, k_sel, _ = private_ged(
        kp.M, kp.Sigma, budget, sigma1, sigma2, rng, ledger, k, data.n, plan.H, retries=retries
    )
    return SdrEstimate(
        B_hat=B,
        eigenvalues=spectrum,
        k_selected=k_sel,
        ledger=ledger,
        diagnostics={"sigma1": sigma1, "sigma2": sigma2, "c_x": c_x},
    )


# --- gradient pass ----------------------------------------------------------


@dataclass
class DpSirConfig:
    """Tuning of the private gradient pass.

    Unset fields (None) are resolved from the data and the initializer by
    :func:`resolve_config`: penalty = lam1/c1, eta = c2/lam1,
    T = ceil(log n), C = c_scale * (largest initial column norm),
    R = r_multiplier * 2 C sqrt(log n), sigma from the sensitivity bound.
    ``noise_multiplier`` scales the resolved sigma; values below 1 void the
    formal privacy guarantee and exist only for calibration studies.
    """

    budget: PrivacyBudget
    hist_budget: PrivacyBudget = None
    k: object = 1
    H: int = 20
    m: int = None
    eta: float = None
    T: int = None
    lambda_penalty: float = None
    R: float = None
    C: float = None
    sigma: float = None
    c_x: float = None
    c1: float = 2.0
    c2: float = 0.25
    c_scale: float = 1.5
    r_multiplier: float = 1.0
    noise_multiplier: float = 1.0
    rescale_init: bool = True

    def __post_init__(self):
        for name in ("eta", "lambda_penalty", "R", "C", "sigma", "c_x"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise InvalidInput(f"{name} must be positive, got {v}")
        if self.T is not None and self.T < 1:
            raise InvalidInput("T must be at least 1")


def rescale_initial(B0, eigenvalues, penalty):
    """Stationary point of the penalized objective along the initial directions."""
    k = B0.shape[1]
    lam = np.maximum(np.asarray(eigenvalues[:k], dtype=float), 0.0)
    return B0 * np.sqrt(1.0 + lam / penalty)


def resolve_config(config, data, init, sensitivity=sgd_sigma):
    """Fill every unset tuning field; returns (resolved config, starting iterate)."""
    n, p = data.n, data.p
    k = init.B_hat.shape[1]
    lam1 = float(init.eigenvalues[0])
    if not lam1 > 0:
        raise DegenerateSpectrum("initial leading eigenvalue is not positive")
    penalty = config.lambda_penalty or lam1 / config.c1
    eta = config.eta or config.c2 / lam1
    T = config.T or max(1, math.ceil(math.log(n)))
    B0 = rescale_initial(init.B_hat, init.eigenvalues, penalty) if config.rescale_init else init.B_hat.copy()
    C = config.C or config.c_scale * float(np.max(np.linalg.norm(B0, axis=0)))
    R = config.R or config.r_multiplier * 2.0 * C * math.sqrt(math.log(n))
    c_x = config.c_x or data.coord_bound
    sigma = config.sigma
    if sigma is None:
        sigma = config.noise_multiplier * sensitivity(eta, R, c_x, penalty, k, p, T, n)
    resolved = replace(config, eta=eta, T=T, lambda_penalty=penalty, R=R, C=C, sigma=sigma, c_x=c_x, k=k)
    return resolved, B0


def make_folds(n, T, rng):
    """Contiguous blocks of one random permutation."""
    if n // T < 1:
        raise InvalidInput(f"cannot split {n} observations into {T} non-empty folds")
    return np.array_split(rng.permutation(n), T)


def fold_step(X, labels, B, H, eta, penalty, R):
    """``B - 2 eta [ -kern + penalty * cross (gram - I) ]`` on one fold."""
    kern, cross, gram = kernels.fold_terms(X, labels, B, R, H)
    direction = -kern + penalty * cross @ (gram - np.eye(B.shape[1]))
    return B - 2.0 * eta * direction


def dpsir_fit(data, config, init, rng, plan=None, truth=None):
    """Private truncated gradient pass started from ``init``.

    If ``plan`` is None the slices are estimated with ``config.hist_budget``.
    ``truth`` (a p x k basis) only feeds per-step distance diagnostics.
    """
    ledger = BudgetLedger()
    if plan is None:
        if config.hist_budget is None:
            raise InvalidInput("either a slice plan or hist_budget is required")
        plan = estimate_slices(data.y, config.H, config.m, config.hist_budget, rng)
    if plan.privacy_spent is not None:
        ledger.charge("slices", plan.privacy_spent)
    cfg, B = resolve_config(config, data, init)
    budget = cfg.budget
    ledger.charge("sgd", budget)
    X = _centered(data)
    labels = assign_slices(data.y, plan)
    folds = make_folds(data.n, cfg.T, rng)
    sd = None if budget.is_infinite else sgd_noise_sd(cfg.sigma, cfg.T, budget)
    trace = []
    for t, idx in enumerate(folds):
        B = fold_step(X[idx], labels[idx], B, plan.H, cfg.eta, cfg.lambda_penalty, cfg.R)
        if sd is not None:
            B = B + sample_gaussian(rng, sd, B.shape)
            ledger.record(NoiseSpec("gaussian", sd, f"sgd:{t}"))
        B = project_columns(B, cfg.C)
        if truth is not None:
            trace.append(projection_distance(B, truth))
    diagnostics = {"config": cfg, "noise_sd": sd}
    if truth is not None:
        diagnostics["distance_trace"] = trace
    return SdrEstimate(
        B_hat=B,
        eigenvalues=np.asarray(init.eigenvalues),
        k_selected=B.shape[1],
        ledger=ledger,
        iterations_run=len(folds),
        diagnostics=diagnostics,
    )
