"""Differentially private sliced inverse regression."""

from .errors import (
    BudgetExceeded,
    DegenerateHistogram,
    DegenerateRayleigh,
    DegenerateSlicing,
    DegenerateSpectrum,
    DpsirError,
    InvalidInput,
    ParseError,
    RankDeficient,
    SingularCovariance,
)
from .kernels import BACKEND
from .linalg import gen_eig, inv_sqrt, projection_distance, projection_loss, subspace_dist, sym_eig
from .lowdim import DpSirConfig, default_c_n, dp_bic_select, dpsir_fit, dpsir_init
from .mechanisms import (
    INFINITE,
    BudgetLedger,
    NoiseSpec,
    PrivacyBudget,
    exponential_select,
    gaussian_mechanism,
    laplace_mechanism,
    peel_top_columns,
)
from .sir import Dataset, KernelPair, SdrEstimate, oracle_sir, sample_covariance, sample_kernel, sir_fit
from .slicing import SlicePlan, assign_slices, categorical_slices, estimate_slices, make_slices
from .sparse import DpSsirConfig, dp_validate_sparsity, dpspca_fit, dpssir_fit, dpssir_init
from .baselines import RayleighConfig, dp_rayleigh_flow, dp_truncated_rayleigh_flow

__version__ = "0.1.0"
