"""Numerical laboratory for higher-order Langevin diffusion processes."""

from .core import (
    BlockMatrix,
    HoldParams,
    LiftedState,
    MAX_ORDER,
    T_EPS,
    build_forward_matrix,
    char_poly_eval,
    critically_damped_params,
    damped_eigenvalue,
    kron_apply,
    matrix_exponential,
)
from .datasets import (
    CsvFileSpec,
    DatasetSpec,
    GaussianMixtureSpec,
    GridSpec,
    RingSpec,
    heldout_points,
    training_points,
)
from .errors import (
    DivergenceError,
    HoldLabError,
    InvalidOrderError,
    NotCriticallyDampedError,
    NotPositiveSemidefiniteError,
    PoleError,
)
from .filters import (
    FilterSpec,
    HoldFilter,
    OuFilter,
    convolution_reconstruct,
    forced_ode_positions,
    frequency_magnitude,
    impulse_response,
    natural_response,
    transfer_function,
)
from .forward import (
    AuxPolicy,
    BlockCovariance,
    FixedPerSample,
    Marginalized,
    cholesky_block,
    covariance_at,
    initial_covariance,
    lift_data,
    sample_forward,
)
from .metrics import (
    FmemReport,
    collapse_curve,
    det_ratio,
    fmem,
    gaussian_w2,
    mahalanobis_sq,
)
from .sampler import (
    TimeGrid,
    Trajectory,
    ou_pf_ode_generate,
    ou_reverse_sde_generate,
    pf_ode_endpoints,
    pf_ode_generate,
    sample_prior,
)
from .score import (
    Dataset,
    EmpiricalMixture,
    empirical_score_fn,
    loss_weight,
    mc_loss,
    mixture_at,
    ou_score,
    responsibilities,
    score_full,
    score_last_block,
)

__all__ = [
    "AuxPolicy",
    "BlockCovariance",
    "BlockMatrix",
    "CsvFileSpec",
    "Dataset",
    "DatasetSpec",
    "DivergenceError",
    "EmpiricalMixture",
    "FilterSpec",
    "FixedPerSample",
    "FmemReport",
    "GaussianMixtureSpec",
    "GridSpec",
    "HoldFilter",
    "HoldLabError",
    "HoldParams",
    "InvalidOrderError",
    "LiftedState",
    "MAX_ORDER",
    "Marginalized",
    "NotCriticallyDampedError",
    "NotPositiveSemidefiniteError",
    "OuFilter",
    "PoleError",
    "RingSpec",
    "T_EPS",
    "TimeGrid",
    "Trajectory",
    "build_forward_matrix",
    "char_poly_eval",
    "cholesky_block",
    "collapse_curve",
    "convolution_reconstruct",
    "covariance_at",
    "critically_damped_params",
    "damped_eigenvalue",
    "det_ratio",
    "empirical_score_fn",
    "fmem",
    "forced_ode_positions",
    "frequency_magnitude",
    "gaussian_w2",
    "heldout_points",
    "impulse_response",
    "initial_covariance",
    "kron_apply",
    "lift_data",
    "loss_weight",
    "mahalanobis_sq",
    "matrix_exponential",
    "mc_loss",
    "mixture_at",
    "natural_response",
    "ou_pf_ode_generate",
    "ou_reverse_sde_generate",
    "ou_score",
    "pf_ode_endpoints",
    "pf_ode_generate",
    "responsibilities",
    "sample_forward",
    "sample_prior",
    "score_full",
    "score_last_block",
    "training_points",
    "transfer_function",
]
