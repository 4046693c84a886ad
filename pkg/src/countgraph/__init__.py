"""Sparse graphical modeling of multivariate count time series.

Counts are conditionally Poisson around a latent stationary Gaussian
vector AR(p) field; parameters are estimated by Monte Carlo EM with a
Metropolis-Hastings E-step, an l1-type penalty on the inverse spectral
density sparsifies the partial-correlation structure, and graphs are read
off the fitted model: undirected edges from thresholded partial
coherence, directed edges from AR coefficient support.
"""

from .covariance import StationaryCov, stationary_covariance
from .exceptions import (
    CountgraphError,
    DivergenceError,
    FitDivergedError,
    NonStationaryError,
    NumericalError,
)
from .graphs import (
    DEFAULT_CAUSALITY_TOL,
    DEFAULT_RHO_STAR,
    GraphResult,
    causality_graph,
    edge_weights,
    extract_graphs,
    partial_graph,
)
from .likelihood import (
    OVERFLOW_CAP,
    build_covariates,
    conditional_mean,
    covariate_offsets,
    joint_log_density,
    joint_log_density_samples,
)
from .mcem import FitConfig, FitIteration, FitTrace, batch_means_se, run_mcem
from .mstep import (
    EStats,
    OptimizerConfig,
    compute_estats,
    estimate_Q,
    initial_params,
    m_step,
    m_step_objective,
    penalty_h1,
    q_likelihood,
    smoothed_penalty,
)
from .params import (
    CountPanel,
    LatentSample,
    ModelParams,
    ValidationReport,
    companion_matrix,
    spectral_radius,
    validate_params,
)
from .sampler import (
    ChainConfig,
    ProposalParams,
    SampleResult,
    acceptance_log_ratio,
    initial_state,
    numba_available,
    numba_enabled_by_default,
    proposal_params,
    sample_latent,
)
from .selection import (
    SelectionReport,
    SweepPoint,
    auto_gamma_grid,
    effective_k,
    information_scores,
    select_gamma,
    select_order,
    tradeoff_sweep,
)
from .simulate import TruthSpec, generate, make_truth, random_sparse_ar
from .spectral import (
    CoherenceField,
    WStack,
    compute_W,
    inverse_spectral_density,
    partial_coherence,
    w_expansion,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # params / data
    "ModelParams", "CountPanel", "LatentSample", "ValidationReport",
    "companion_matrix", "spectral_radius", "validate_params",
    # errors
    "CountgraphError", "DivergenceError", "FitDivergedError",
    "NonStationaryError", "NumericalError",
    # covariance
    "StationaryCov", "stationary_covariance",
    # likelihood
    "OVERFLOW_CAP", "build_covariates", "conditional_mean",
    "covariate_offsets", "joint_log_density", "joint_log_density_samples",
    # spectral / graphs
    "WStack", "CoherenceField", "compute_W", "inverse_spectral_density",
    "w_expansion", "partial_coherence",
    "GraphResult", "partial_graph", "causality_graph", "edge_weights",
    "extract_graphs", "DEFAULT_RHO_STAR", "DEFAULT_CAUSALITY_TOL",
    # sampler
    "ChainConfig", "ProposalParams", "SampleResult", "proposal_params",
    "acceptance_log_ratio", "sample_latent", "initial_state",
    "numba_available", "numba_enabled_by_default",
    # mcem
    "EStats", "OptimizerConfig", "compute_estats", "penalty_h1",
    "smoothed_penalty", "estimate_Q", "q_likelihood", "m_step_objective",
    "m_step", "initial_params",
    "FitConfig", "FitIteration", "FitTrace", "run_mcem", "batch_means_se",
    # selection
    "SweepPoint", "SelectionReport", "effective_k", "information_scores", "tradeoff_sweep",
    "select_gamma", "select_order", "auto_gamma_grid",
    # simulation
    "TruthSpec", "generate", "make_truth", "random_sparse_ar",
]
