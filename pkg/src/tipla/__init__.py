"""Tamed interacting particle Langevin algorithms for maximum marginal likelihood.

The package couples N latent-particle Langevin chains through a shared
parameter whose drift averages over all particles.  Taming rescales the
superlinearly growing gradients so the explicit schemes stay stable, and the
particle count plays the role of an inverse temperature concentrating the
parameter marginal of the invariant measure around the maximizer.
"""

from .errors import ConfigurationError, InputError
from .potentials import (GradientValue, PotentialModel, build_model, eval_gradient,
                         finite_difference_check, probe_coordinate_dissipativity,
                         probe_dissipativity, probe_growth_order, probe_strong_convexity)
from .taming import TamingSpec, p_from_growth_order, tame_coordinatewise, tame_uniform
from .sampler import (ALGORITHMS, InitPolicy, ParticleState, RunConfig, Trajectory,
                      init_state, rescaled_norm_sq, run, stepsize_limit)
from .metrics import (ScalingReport, divergence_summary, estimate_moments,
                      variance_vs_n_study, w2_empirical_1d, w2_to_point)
from .config import ExperimentConfig, parse_config, write_config
from .experiments import run_experiment, run_property_suite

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "InputError",
    "GradientValue", "PotentialModel", "build_model", "eval_gradient",
    "finite_difference_check", "probe_coordinate_dissipativity", "probe_dissipativity",
    "probe_growth_order", "probe_strong_convexity",
    "TamingSpec", "p_from_growth_order", "tame_coordinatewise", "tame_uniform",
    "ALGORITHMS", "InitPolicy", "ParticleState", "RunConfig", "Trajectory",
    "init_state", "rescaled_norm_sq", "run", "stepsize_limit",
    "ScalingReport", "divergence_summary", "estimate_moments", "variance_vs_n_study",
    "w2_empirical_1d", "w2_to_point",
    "ExperimentConfig", "parse_config", "write_config",
    "run_experiment", "run_property_suite",
    "__version__",
]
