"""Picard iteration, Girsanov path densities and information estimates
for feedback diffusions on a fixed time grid."""

__version__ = "0.1.0"

from .bounds import BoundSet, compute_bounds
from .density import (
    LIMIT,
    DegenerateMixtureError,
    DensityError,
    LogDensity,
    joint_log_density,
    log_density_fixed_message,
    log_density_fixed_message_iterate,
    log_mixture_density,
)
from .engine import Accumulator, RngStream, ito_integral, quadrature, sample_brownian, sup_norm
from .estimators import (
    EstimateReport,
    convergence_sweep,
    kl_iterate_vs_limit,
    kl_joint_vs_product,
    kl_vs_wiener,
    mutual_information,
    picard_decay_sweep,
)
from .model import (
    ConditionReport,
    DiffusionFunctional,
    DriftFunctional,
    EvaluationError,
    MessageLaw,
    Path,
    RegularityError,
    TimeGrid,
    constant_gaussian_message,
    cosine_gaussian_message,
    drift_from_affine,
    drift_from_callable,
    drift_from_expression,
    identity_diffusion,
    probe_conditions,
    reduce_diffusion,
    truncate_drift,
    zero_message,
)
from .picard import DivergenceError, IterationBundle, invert_noise, picard_step, run_iteration

__all__ = [
    "Accumulator",
    "BoundSet",
    "ConditionReport",
    "DegenerateMixtureError",
    "DensityError",
    "DiffusionFunctional",
    "DivergenceError",
    "DriftFunctional",
    "EstimateReport",
    "EvaluationError",
    "IterationBundle",
    "LIMIT",
    "LogDensity",
    "MessageLaw",
    "Path",
    "RegularityError",
    "RngStream",
    "TimeGrid",
    "compute_bounds",
    "constant_gaussian_message",
    "convergence_sweep",
    "cosine_gaussian_message",
    "drift_from_affine",
    "drift_from_callable",
    "drift_from_expression",
    "identity_diffusion",
    "invert_noise",
    "ito_integral",
    "joint_log_density",
    "kl_iterate_vs_limit",
    "kl_joint_vs_product",
    "kl_vs_wiener",
    "log_density_fixed_message",
    "log_density_fixed_message_iterate",
    "log_mixture_density",
    "mutual_information",
    "picard_decay_sweep",
    "picard_step",
    "probe_conditions",
    "quadrature",
    "reduce_diffusion",
    "run_iteration",
    "sample_brownian",
    "sup_norm",
    "truncate_drift",
    "zero_message",
]
