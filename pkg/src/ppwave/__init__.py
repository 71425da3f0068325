"""Regularized discontinuous coordinate transformation of impulsive pp-waves."""

from .delta_nets import DEFAULT_SCHEDULE, EpsSchedule, StrictDeltaNet, check_strict_delta, model_net
from .errors import (BlowUpError, ConfigurationError, DomainError, InversionFailure, NonConvergenceError,
                     NumericalError, PPWaveError, PreconditionError)
from .geodesics import InitialData, existence_bound, geodesic_limit, integrate_geodesic
from .profiles import SpacetimePoint, WaveProfile, builtin_profile, metric_continuous, metric_regularized
from .transform import TransformEvaluator, TransformFamily, s_closed, t_closed

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_SCHEDULE", "EpsSchedule", "StrictDeltaNet", "check_strict_delta", "model_net",
    "BlowUpError", "ConfigurationError", "DomainError", "InversionFailure", "NonConvergenceError",
    "NumericalError", "PPWaveError", "PreconditionError",
    "InitialData", "existence_bound", "geodesic_limit", "integrate_geodesic",
    "SpacetimePoint", "WaveProfile", "builtin_profile", "metric_continuous", "metric_regularized",
    "TransformEvaluator", "TransformFamily", "s_closed", "t_closed",
]
