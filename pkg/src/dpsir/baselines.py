"""Rayleigh-flow baselines for one-dimensional targets.

Each iteration draws fresh symmetric Gaussian perturbations of the sample
covariance and kernel matrix and applies
``v <- (I + (eta/rho)(M~ - rho Sigma~)) v`` followed by normalization, with
``rho = v'M~v / v'Sigma~v``. The truncated variant keeps the ``s`` largest
coordinates after every step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRayleigh, InvalidInput
from .lowdim import init_sigmas, pencil_noise_sd
from .mechanisms import BudgetLedger, NoiseSpec, symmetric_gaussian
from .sir import SdrEstimate, sample_kernel
from .slicing import assign_slices


@dataclass
class RayleighConfig:
    """``sigma1``/``sigma2`` are per-iteration entrywise noise sds for Sigma and M."""

    v0: np.ndarray
    sigma1: float = 0.0
    sigma2: float = 0.0
    eta: float = 1.0
    T: int = 10
    s: int = None

    def __post_init__(self):
        v = np.asarray(self.v0, dtype=float).ravel()
        nrm = np.linalg.norm(v)
        if not nrm > 0:
            raise InvalidInput("v0 must be non-zero")
        if abs(nrm - 1.0) > 1e-8:
            v = v / nrm
        self.v0 = v
        if self.T < 1:
            raise InvalidInput("T must be at least 1")
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise InvalidInput("noise sds must be non-negative")
        if self.s is not None and not 1 <= self.s <= v.size:
            raise InvalidInput(f"s must lie in [1, {v.size}]")


def flow_noise_sds(p, n, c_x, budget, T, multiplier=1.0):
    """Per-iteration sds when (eps, delta) is split evenly over T iterations."""
    s1, s2 = init_sigmas(p, n, c_x)
    per = budget.scaled(1.0 / T)
    return multiplier * pencil_noise_sd(s1, per), multiplier * pencil_noise_sd(s2, per)


def truncate_top(v, s):
    """Zero all but the ``s`` largest-magnitude entries (lowest index wins ties)."""
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    out = np.zeros_like(v)
    out[keep] = v[keep]
    return out


def rayleigh_step(v, M, Sigma, eta):
    num = v @ M @ v
    den = v @ Sigma @ v
    if abs(den) < 1e-300:
        raise DegenerateRayleigh("v' Sigma v vanished")
    rho = num / den
    if abs(rho) < 1e-12:
        raise DegenerateRayleigh(f"Rayleigh quotient {rho:.3g} is numerically zero")
    w = v + (eta / rho) * (M @ v - rho * (Sigma @ v))
    return w, rho


def _flow(M, Sigma, config, rng, ledger, truncate):
    v = config.v0.copy()
    p = v.size
    if M.shape != (p, p):
        raise InvalidInput(f"v0 has length {p} but the matrices are {M.shape}")
    history = []
    for t in range(config.T):
        M_t, S_t = M, Sigma
        if config.sigma1 > 0:
            S_t = Sigma + symmetric_gaussian(rng, config.sigma1, p)
            ledger.record(NoiseSpec("gaussian", config.sigma1, f"flow_covariance:{t}"))
        if config.sigma2 > 0:
            M_t = M + symmetric_gaussian(rng, config.sigma2, p)
            ledger.record(NoiseSpec("gaussian", config.sigma2, f"flow_kernel:{t}"))
        w, rho = rayleigh_step(v, M_t, S_t, config.eta)
        if truncate:
            w = truncate_top(w, config.s)
        nrm = np.linalg.norm(w)
        if not nrm > 0:
            raise DegenerateRayleigh("flow iterate collapsed to zero")
        v = w / nrm
        history.append(rho)
    return v, history


def _run(data, plan, config, rng, budget, truncate):
    ledger = BudgetLedger()
    if plan.privacy_spent is not None:
        ledger.charge("slices", plan.privacy_spent)
    if budget is not None:
        per = budget.scaled(1.0 / config.T)
        for t in range(config.T):
            ledger.charge(f"flow:{t}", per)
    kp = sample_kernel(data, assign_slices(data.y, plan), plan.H)
    v, rhos = _flow(kp.M, kp.Sigma, config, rng, ledger, truncate)
    return SdrEstimate(
        B_hat=v[:, None],
        eigenvalues=np.asarray(rhos),
        k_selected=1,
        ledger=ledger,
        iterations_run=config.T,
        support=np.flatnonzero(v) if truncate else None,
    )


def dp_rayleigh_flow(data, plan, config, rng, budget=None):
    """Noisy Rayleigh flow; returns an estimate whose ``B_hat`` is the unit p x 1 v_T.

    ``budget`` (optional) is charged as (eps/T, delta/T) per iteration.
    """
    return _run(data, plan, config, rng, budget, truncate=False)


def dp_truncated_rayleigh_flow(data, plan, config, rng, budget=None):
    """Noisy truncated Rayleigh flow keeping ``config.s`` coordinates per step."""
    if config.s is None:
        raise InvalidInput("the truncated flow needs a sparsity s")
    return _run(data, plan, config, rng, budget, truncate=True)


def flow_from_matrices(M, Sigma, config, rng=None, truncate=False):
    """Run the flow on given matrices; returns (v_T, Rayleigh quotients)."""
    ledger = BudgetLedger()
    return _flow(np.asarray(M, float), np.asarray(Sigma, float), config, rng, ledger, truncate)


__all__ = [
    "RayleighConfig",
    "dp_rayleigh_flow",
    "dp_truncated_rayleigh_flow",
    "flow_from_matrices",
    "flow_noise_sds",
    "truncate_top",
]
