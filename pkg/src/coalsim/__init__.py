"""Coalescent likelihood estimation by backward-in-time importance sampling.

Simulates genealogies backwards from an observed population, optionally
stopping early at a configurable population size with a stationary-product
bias correction, and aggregates the weights into log-likelihood estimates,
mu surfaces and maximum-likelihood mutation-rate estimates.
"""

__version__ = "0.1.0"

from .engine import (  # noqa: F401
    EngineOptions,
    Move,
    MoveKind,
    SimulationRecord,
    apply_move,
    move_coefficients,
    propose_move,
    simulate_once,
    step_log_weight,
    terminal_log_factor,
    total_rate,
)
from .errors import CoalsimError, InputError, NumericalError  # noqa: F401
from .estimator import (  # noqa: F401
    MleResult,
    SurfacePoint,
    TrajectorySummary,
    estimate,
    mle,
    surface,
    trajectory_summary,
)
from .model import (  # noqa: F401
    Configuration,
    MutationModel,
    StationaryDistribution,
    build_flip_model,
    build_from_spec,
    build_single_site_model,
    sample_population,
    stationary,
)
from .oracle import exact_likelihood, level_normalisation  # noqa: F401
from .rng import Stream, StreamSpec, categorical, derive_stream  # noqa: F401
