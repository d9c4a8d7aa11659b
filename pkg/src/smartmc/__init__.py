"""Covariate-dependent Markov chains fitted by multi-run pattern search on spheres."""

from .benchmarks import BenchmarkFunction, eval_benchmark
from .data_io import (
    SimConfig,
    load_dataset,
    load_fit,
    reduce_sequence,
    save_fit,
    simulate_dataset,
    standardize_covariates,
)
from .model import (
    CoefficientMatrix,
    Dataset,
    FitResult,
    bootstrap_se,
    coefficient_mad,
    count_matrix,
    empirical_matrix,
    fit,
    log_likelihood,
    nonrare_mask,
    odds_ratios,
    patient_transition_matrix,
)
from .mscor import MscorConfig, OptResult, detect_nonconvexity, iterate, optimize
from .sphere import MoveSpec, MultiSpherePoint, SphereShape, propose_move, random_point, validate_point

__version__ = "0.1.0"
