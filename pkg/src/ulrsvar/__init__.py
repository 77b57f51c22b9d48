"""Short-run VAR plus ultra-long-run OU factor: simulation, estimation and long-horizon prediction."""
from .errors import (
    ClippedCovarianceWarning,
    DegenerateError,
    DimensionError,
    IngestError,
    NonStationaryError,
    WindowError,
)
from .model_core import (
    DiscretizedULR,
    ModelParams,
    SRParams,
    ULRParams,
    discretize_ulr,
    kron_sum,
    mat_exp,
    asymptotic_limit,
    bivariate_design_params,
    stationary_cov_sr,
    stationary_cov_ulr,
    theo_acov_univ,
    theo_spectrum_univ,
)
from .simulator import ArrayPath, LTUVariant, simulate_array, simulate_ltu, simulate_ou, tail_prob

__all__ = [
    "ArrayPath",
    "ClippedCovarianceWarning",
    "DegenerateError",
    "DimensionError",
    "DiscretizedULR",
    "IngestError",
    "LTUVariant",
    "ModelParams",
    "NonStationaryError",
    "SRParams",
    "ULRParams",
    "WindowError",
    "discretize_ulr",
    "kron_sum",
    "mat_exp",
    "asymptotic_limit",
    "bivariate_design_params",
    "simulate_array",
    "simulate_ltu",
    "simulate_ou",
    "stationary_cov_sr",
    "stationary_cov_ulr",
    "tail_prob",
    "theo_acov_univ",
    "theo_spectrum_univ",
]
