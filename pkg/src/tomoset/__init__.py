"""Tomography over the full set of maximum-likelihood states.

When the measured data cannot single out one density matrix, the likelihood
maximizers form a convex set.  This package reconstructs that set, streams
linear functionals (entanglement witnesses among them) across it, and picks
the maximum-entropy state as the least committed point estimate.
"""
from .basis import BasisBuildError, OperatorBasis, build_basis, decompose, rank_of_operator_set
from .config import DEFAULT, Config, PatternSearchConfig
from .convexset import (
    ConvexSetModel,
    InfeasibleModelError,
    LinearOptResult,
    SolverStallError,
    collect_members,
    is_singleton,
    optimize_linear,
    plateau_model,
    try_add_member,
)
from .core import (
    hermitian_part,
    hilbert_schmidt_distance,
    is_positive_semidefinite,
    partial_transpose,
    require_density,
    require_hermitian,
    trace_inner_product,
    von_neumann_entropy,
)
from .entropy import (
    MlmeResult,
    PipelineError,
    combine,
    conditional_entropy,
    gamma_residual,
    maximize_entropy,
    penalty_floor,
    sdp_mlme,
    steepest_ascent_mlme,
)
from .gramsearch import next_independent_estimator, normalized_gram, overlap_floor, ps_mlme, span_convex_set
from .harness import (
    ExperimentSpec,
    TrialRecord,
    random_pom,
    random_product_state,
    run_fig1,
    run_fig2,
    sample_counts,
    trial_rng,
)
from .likelihood import CountData, MlSolution, Pom, log_likelihood, ml_estimate, probabilities
from .sampling import random_direction, random_pure_state, random_wishart, reduced_purity
from .witness import WitnessEntry, WitnessReport, certify_entanglement, decomposable_witness

__version__ = "0.1.0"

__all__ = [
    "BasisBuildError",
    "OperatorBasis",
    "build_basis",
    "decompose",
    "rank_of_operator_set",
    "DEFAULT",
    "Config",
    "PatternSearchConfig",
    "ConvexSetModel",
    "InfeasibleModelError",
    "LinearOptResult",
    "SolverStallError",
    "collect_members",
    "is_singleton",
    "optimize_linear",
    "plateau_model",
    "try_add_member",
    "hermitian_part",
    "hilbert_schmidt_distance",
    "is_positive_semidefinite",
    "partial_transpose",
    "require_density",
    "require_hermitian",
    "trace_inner_product",
    "von_neumann_entropy",
    "MlmeResult",
    "PipelineError",
    "combine",
    "conditional_entropy",
    "gamma_residual",
    "maximize_entropy",
    "penalty_floor",
    "sdp_mlme",
    "steepest_ascent_mlme",
    "next_independent_estimator",
    "normalized_gram",
    "overlap_floor",
    "ps_mlme",
    "span_convex_set",
    "ExperimentSpec",
    "TrialRecord",
    "random_pom",
    "random_product_state",
    "run_fig1",
    "run_fig2",
    "sample_counts",
    "trial_rng",
    "CountData",
    "MlSolution",
    "Pom",
    "log_likelihood",
    "ml_estimate",
    "probabilities",
    "random_direction",
    "random_pure_state",
    "random_wishart",
    "reduced_purity",
    "WitnessEntry",
    "WitnessReport",
    "certify_entanglement",
    "decomposable_witness",
]
