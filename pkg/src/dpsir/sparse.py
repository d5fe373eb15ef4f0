"""Differentially private sparse SIR and sparse PCA for p >= n.

The initializer screens covariates by privately peeling the diagonal of the
kernel matrix and then runs the perturbed-pencil estimator on the selected
block. The main estimator alternates a truncated gradient step with private
row peeling, so every iterate has at most ``s_prime`` non-zero rows.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DegenerateSlicing, InvalidInput, SingularCovariance
from .linalg import gen_eig, gram_normalize, projection_distance, sym_eig
from .lowdim import (
    DpSirConfig,
    make_folds,
    pencil_noise_sd,
    private_ged,
    project_columns,
    resolve_config,
)
from .mechanisms import (
    BudgetLedger,
    NoiseSpec,
    PrivacyBudget,
    exponential_select,
    peel_top_columns,
    sample_laplace,
    symmetric_gaussian,
)
from .sir import SdrEstimate, _centered, embed_rows
from .slicing import assign_slices, estimate_slices


@dataclass
class DpSsirConfig(DpSirConfig):
    """Gradient-pass tuning plus the peeling sparsity and validation settings."""

    s_prime: int = 6
    candidates: tuple = None
    C_B: float = 2.0
    val_fraction: float = 0.2

    def __post_init__(self):
        super().__post_init__()
        if self.s_prime < 1:
            raise InvalidInput("s_prime must be at least 1")
        if self.candidates is not None and list(self.candidates) != sorted(set(self.candidates)):
            raise InvalidInput("candidates must be strictly ascending")


# --- sensitivities ----------------------------------------------------------


def sparse_init_sigmas(s_prime, n, c_x):
    """(diagonal screening, covariance block, kernel block) sensitivities."""
    return 7.0 * c_x**2 / n, 2.0 * s_prime * c_x**2 / n, 7.0 * s_prime * c_x**2 / n


def screening_scale(sigma, s_prime, budget):
    """Per-round Laplace scale of the diagonal screen: sigma sqrt(3 s' log(2/delta)) / (eps/2)."""
    return sigma * math.sqrt(3.0 * s_prime * math.log(2.0 / budget.delta)) / (budget.epsilon / 2.0)


def sparse_sgd_sigma(eta, R, c_x, penalty, k, p, T, n):
    """Per-step sensitivity bound of the sparse gradient pass (no sqrt(pk) factor)."""
    return 2.0 * eta * (7 * c_x * R + penalty * (2 * c_x * R + 4 * k * c_x * R**3)) * T / n


def validation_sigma(C_B, k, s_max, c_x, n_val):
    """Sensitivity of a validation loss: C_B^2 k 7 sqrt(s_max) c_x^2 / |V|."""
    return C_B**2 * k * 7.0 * math.sqrt(s_max) * c_x**2 / n_val


# --- blocks of the sample matrices -------------------------------------------


def _slice_scaled(X, labels, H):
    sums, counts = kernels.slice_sums(X, labels, H)
    live = counts > 0
    if live.sum() < 2:
        raise DegenerateSlicing("all observations fall in a single slice")
    return sums[live] / np.sqrt(counts[live])[:, None]


def kernel_diagonal(X, labels, H):
    """Diagonal of the kernel matrix without forming it."""
    scaled = _slice_scaled(X, labels, H)
    return np.sum(scaled * scaled, axis=0) / X.shape[0]


def kernel_block(X, labels, H, rows):
    scaled = _slice_scaled(X, labels, H)[:, rows]
    M = scaled.T @ scaled / X.shape[0]
    return 0.5 * (M + M.T)


def covariance_block(X, rows):
    Xs = X[:, rows]
    S = Xs.T @ Xs / X.shape[0]
    return 0.5 * (S + S.T)


def screen_diagonal(d, s_prime, sigma, budget, rng, ledger, label="screen"):
    """Ordered top-``s_prime`` indices of |d| after per-round Laplace noise."""
    p = d.size
    if not 1 <= s_prime <= p:
        raise InvalidInput(f"s_prime must lie in [1, {p}], got {s_prime}")
    if budget.is_infinite:
        return kernels.peel_select(np.abs(d), np.zeros((s_prime, p)))
    b = screening_scale(sigma, s_prime, budget)
    ledger.record(NoiseSpec("laplace", b, label))
    return kernels.peel_select(np.abs(d), sample_laplace(rng, b, (s_prime, p)))


# --- initializer ------------------------------------------------------------


def _sparse_release(X, labels, H, s_prime, budget, rng, ledger, c_x, sigma, sigma1, sigma2):
    """Screen s' covariates, then perturb the kernel and covariance blocks.

    Charges (eps/2, delta/2) for the screen and (eps/4, delta/4) for each block.
    Returns (selected indices, noisy kernel block, noisy covariance block).
    """
    n = X.shape[0]
    d0, d1, d2 = sparse_init_sigmas(s_prime, n, c_x)
    sigma = d0 if sigma is None else sigma
    sigma1 = d1 if sigma1 is None else sigma1
    sigma2 = d2 if sigma2 is None else sigma2
    half = budget.scaled(0.5)
    P = screen_diagonal(kernel_diagonal(X, labels, H), s_prime, sigma, budget, rng, ledger)
    ledger.charge("screen", half)
    M = kernel_block(X, labels, H, P)
    S = covariance_block(X, P)
    return P, M, S, (sigma, sigma1, sigma2), half


def dpssir_init(data, plan, k, s_prime, budget, rng, sigma=None, sigma1=None, sigma2=None, c_x=None, retries=1):
    """Screened perturbed-pencil initial estimate, embedded into p dimensions.

    ``k`` may be ``"auto"`` (DP-BIC on the private block spectrum). The ledger
    holds the slice charge of ``plan`` plus (eps, delta) for screening and
    the two block releases.
    """
    if s_prime > data.p:
        raise InvalidInput(f"s_prime={s_prime} exceeds p={data.p}")
    if s_prime > data.n:
        raise InvalidInput(f"s_prime={s_prime} exceeds n={data.n}")
    c_x = data.coord_bound if c_x is None else c_x
    ledger = BudgetLedger()
    if plan.privacy_spent is not None:
        ledger.charge("slices", plan.privacy_spent)
    X = _centered(data)
    labels = assign_slices(data.y, plan)
    P, M, S, sigmas, half = _sparse_release(
        X, labels, plan.H, s_prime, budget, rng, ledger, c_x, sigma, sigma1, sigma2
    )
    if k != "auto" and not 1 <= k <= min(plan.H - 1, s_prime):
        raise InvalidInput(f"k must lie in [1, {min(plan.H - 1, s_prime)}]")
    B_sub, spectrum, k_sel, _ = private_ged(
        M, S, half, sigmas[1], sigmas[2], rng, ledger, k, data.n, min(plan.H, s_prime), retries=retries
    )
    return SdrEstimate(
        B_hat=embed_rows(B_sub, P, data.p),
        eigenvalues=spectrum,
        k_selected=k_sel,
        ledger=ledger,
        support=np.asarray(P),
        diagnostics={"sigma": sigmas[0], "sigma1": sigmas[1], "sigma2": sigmas[2], "c_x": c_x},
    )


# --- gradient pass with peeling ----------------------------------------------


def row_support(B, tol=0.0):
    return np.flatnonzero(np.any(np.abs(B) > tol, axis=1))


def peel_rows(B, s_prime, budget, sigma, rng, ledger, label):
    """Keep ``s_prime`` privately selected rows of ``B`` (noised), zero the rest."""
    S, release = peel_top_columns(B.T, s_prime, budget, sigma, rng, ledger=ledger, label=label)
    out = np.zeros_like(B)
    out[S] = release.T
    return out, S


def _sparse_loop(X, B, cfg, folds, rng, ledger, step, trace_fn=None):
    T = len(folds)
    per_step = cfg.budget.scaled(1.0 / T)
    supports, trace = [], []
    for t, idx in enumerate(folds):
        B = step(X[idx], idx, B)
        B, S = peel_rows(B, cfg.s_prime, per_step, cfg.sigma, rng, ledger, f"peel:{t}")
        B = project_columns(B, cfg.C)
        supports.append(np.sort(S))
        if trace_fn is not None:
            trace.append(trace_fn(B))
    return B, supports, trace


def _finish(B, init, ledger, cfg, supports, trace):
    try:
        normalized = gram_normalize(B)
    except SingularCovariance:
        normalized = None
    diagnostics = {"config": cfg, "raw": B, "supports": supports}
    if trace:
        diagnostics["distance_trace"] = trace
    return SdrEstimate(
        B_hat=normalized if normalized is not None else B,
        eigenvalues=np.asarray(init.eigenvalues),
        k_selected=B.shape[1],
        ledger=ledger,
        iterations_run=len(supports),
        support=row_support(B),
        normalized=normalized,
        diagnostics=diagnostics,
    )


def dpssir_fit(data, config, init, rng, plan=None, truth=None):
    """Private sparse gradient pass: truncated step, row peeling, column projection.

    The returned ``B_hat`` is ``B (B'B)^{-1/2}`` of the last iterate; the raw
    iterate is kept in ``diagnostics["raw"]``.
    """
    ledger = BudgetLedger()
    if plan is None:
        if config.hist_budget is None:
            raise InvalidInput("either a slice plan or hist_budget is required")
        plan = estimate_slices(data.y, config.H, config.m, config.hist_budget, rng)
    if plan.privacy_spent is not None:
        ledger.charge("slices", plan.privacy_spent)
    if config.s_prime > data.p:
        raise InvalidInput(f"s_prime={config.s_prime} exceeds p={data.p}")
    cfg, B = resolve_config(config, data, init, sensitivity=sparse_sgd_sigma)
    if cfg.s_prime < B.shape[1]:
        raise InvalidInput("s_prime must be at least the number of directions")
    ledger.charge("sgd", cfg.budget)
    X = _centered(data)
    labels = assign_slices(data.y, plan)
    folds = make_folds(data.n, cfg.T, rng)
    eye = np.eye(B.shape[1])

    def step(Xf, idx, B):
        kern, cross, gram = kernels.fold_terms(Xf, labels[idx], B, cfg.R, plan.H)
        return B - 2.0 * cfg.eta * (-kern + cfg.lambda_penalty * cross @ (gram - eye))

    trace_fn = (lambda B: projection_distance(B, truth)) if truth is not None else None
    B, supports, trace = _sparse_loop(X, B, cfg, folds, rng, ledger, step, trace_fn)
    return _finish(B, init, ledger, cfg, supports, trace)


# --- choosing s' --------------------------------------------------------------


@dataclass
class ValidationResult:
    s_prime: int
    index: int
    losses: np.ndarray
    ledger: BudgetLedger = field(default_factory=BudgetLedger)
    support: np.ndarray = None
    sensitivity: float = None


def dp_validate_sparsity(data, plan, candidates, budget, C_B, sigma=None, rng=None, k=1, val_fraction=0.2, c_x=None):
    """Pick s' from ``candidates`` by private validation.

    One screen at s_max on the training part fixes nested prefixes; each
    candidate is fit on its prefix block, its columns are truncated to norm
    ``C_B``, and it is scored by the validation trace. The exponential
    mechanism samples the winner. Charges the slices of ``plan``, (eps, delta)
    for the training release and (eps, 0) for the selection.
    """
    candidates = [int(s) for s in candidates]
    if not candidates:
        raise InvalidInput("the candidate set is empty")
    if candidates != sorted(set(candidates)) or candidates[0] < 1:
        raise InvalidInput("candidates must be positive and strictly ascending")
    s_max = candidates[-1]
    if s_max > data.p:
        raise InvalidInput(f"largest candidate {s_max} exceeds p={data.p}")
    n_val = int(round(val_fraction * data.n))
    if n_val < 10 or data.n - n_val < s_max:
        raise InvalidInput(f"split leaves {n_val} validation and {data.n - n_val} training rows")
    c_x = data.coord_bound if c_x is None else c_x
    if sigma is None:
        sigma = validation_sigma(C_B, k, s_max, c_x, n_val)

    ledger = BudgetLedger()
    if plan.privacy_spent is not None:
        ledger.charge("slices", plan.privacy_spent)
    X = _centered(data)
    labels = assign_slices(data.y, plan)
    perm = rng.permutation(data.n)
    val, tr = perm[:n_val], perm[n_val:]
    P, M, S, sigmas, half = _sparse_release(
        X[tr], labels[tr], plan.H, s_max, budget, rng, ledger, c_x, None, None, None
    )
    ledger.charge("covariance_release", half.scaled(0.5))
    ledger.charge("kernel_release", half.scaled(0.5))
    if not budget.is_infinite:
        M, S = _perturb_blocks(M, S, half, sigmas[1], sigmas[2], rng, ledger)

    M_val = kernel_block(X[val], labels[val], plan.H, P)
    losses = np.zeros(len(candidates))
    for i, s in enumerate(candidates):
        kk = min(k, s)
        try:
            B = gen_eig(M[:s, :s], S[:s, :s], kk).vectors
        except SingularCovariance:
            continue
        B = project_columns(B, C_B)
        losses[i] = -np.trace(B.T @ M_val[:s, :s] @ B)
    ledger.charge("select", PrivacyBudget(budget.epsilon, 0.0))
    if len(candidates) == 1:
        idx = 0
    else:
        idx = exponential_select(-losses, sigma, budget.epsilon, rng)
    return ValidationResult(
        s_prime=candidates[idx], index=idx, losses=losses, ledger=ledger, support=np.asarray(P), sensitivity=sigma,
    )


def _perturb_blocks(M, S, budget, sigma1, sigma2, rng, ledger):
    sd1 = pencil_noise_sd(sigma1, budget)
    sd2 = pencil_noise_sd(sigma2, budget)
    ledger.record(NoiseSpec("gaussian", sd1, "covariance_release"))
    ledger.record(NoiseSpec("gaussian", sd2, "kernel_release"))
    s = M.shape[0]
    return M + symmetric_gaussian(rng, sd2, s), S + symmetric_gaussian(rng, sd1, s)


# --- sparse PCA -------------------------------------------------------------


def dpspca_init(data, k, s_prime, budget, rng, c_x=None):
    """Screen the covariance diagonal, then take the top eigenvectors of a perturbed block.

    Charges (eps/2, delta/2) for the screen and (eps/2, delta/2) for the block.
    """
    c_x = data.coord_bound if c_x is None else c_x
    X = _centered(data)
    n = data.n
    ledger = BudgetLedger()
    half = budget.scaled(0.5)
    d = np.sum(X * X, axis=0) / n
    P = screen_diagonal(d, s_prime, 2.0 * c_x**2 / n, budget, rng, ledger)
    ledger.charge("screen", half)
    S = covariance_block(X, P)
    ledger.charge("covariance_release", half)
    if not budget.is_infinite:
        sd = pencil_noise_sd(2.0 * s_prime * c_x**2 / n, half)
        ledger.record(NoiseSpec("gaussian", sd, "covariance_release"))
        S = S + symmetric_gaussian(rng, sd, s_prime)
    w, Q = sym_eig(S)
    return SdrEstimate(
        B_hat=embed_rows(Q[:, :k], P, data.p),
        eigenvalues=w,
        k_selected=k,
        ledger=ledger,
        support=np.asarray(P),
    )


def dpspca_fit(data, config, rng, init=None, truth=None):
    """Leading sparse principal subspace through the peeled gradient pass.

    Minimizes ``-tr(B' Sigma B) + penalty ||B'B - I||_F^2`` with the same
    truncation, peeling and projection as :func:`dpssir_fit`. When ``init``
    is omitted it is produced by :func:`dpspca_init` with ``config.budget``,
    and its charges are included in the returned ledger.
    """
    k = 1 if config.k == "auto" else int(config.k)
    if config.s_prime > data.p or config.s_prime < k:
        raise InvalidInput(f"s_prime must lie in [{k}, {data.p}]")
    ledger = BudgetLedger()
    if init is None:
        init = dpspca_init(data, k, config.s_prime, config.budget, rng, c_x=config.c_x)
        ledger.extend(init.ledger)
    cfg, B = resolve_config(config, data, init, sensitivity=sparse_sgd_sigma)
    ledger.charge("sgd", cfg.budget)
    X = _centered(data)
    folds = make_folds(data.n, cfg.T, rng)
    eye = np.eye(B.shape[1])

    def step(Xf, idx, B):
        Z = np.clip(Xf @ B, -cfg.R, cfg.R)
        cross = Xf.T @ Z / Xf.shape[0]
        return B - 2.0 * cfg.eta * (-cross + cfg.lambda_penalty * B @ (B.T @ B - eye))

    trace_fn = (lambda B: projection_distance(B, truth)) if truth is not None else None
    B, supports, trace = _sparse_loop(X, B, cfg, folds, rng, ledger, step, trace_fn)
    return _finish(B, init, ledger, cfg, supports, trace)
