"""Gradient-flow dynamics and epoch-wise double descent in two-layer linear networks.

The core objects are :class:`ModeParams` (one decoupled weight), the closed-form
trajectory :func:`z_general`, the error decomposition :func:`total_error` and
the inflection analysis in :mod:`epochdd.analysis`.
"""

__version__ = "0.1.0"

from .analysis import (DDVerdict, InflectionPoint, InflectionReport, Scenario, Side,
                       detect_double_descent, inflections, necessary_condition_general,
                       necessary_condition_two_modes, one_layer_zero_init_condition)
from .closed_form import time_at, time_to_minimum, time_to_target, z_general
from .datagen import SpectralDataset, synthesize_exact, synthesize_sampled
from .deep import DeepModeParams, deep_inflections, integrate_deep_scalar
from .errors import ConditionViolation, EpochDDError, RankViolation
from .generalisation import ErrorCurve, mode_error, total_error
from .numerics import IntegratorConfig, integrate_ab, integrate_full_network, integrate_scalar
from .spectral import ModeParams, classify_activity, effective_rate, global_minimum, true_weight

__all__ = [
    "ConditionViolation", "DDVerdict", "DeepModeParams", "EpochDDError", "ErrorCurve",
    "InflectionPoint", "InflectionReport", "IntegratorConfig", "ModeParams", "RankViolation",
    "Scenario", "Side", "SpectralDataset", "classify_activity", "deep_inflections",
    "detect_double_descent", "effective_rate", "global_minimum", "inflections",
    "integrate_ab", "integrate_deep_scalar", "integrate_full_network", "integrate_scalar",
    "mode_error", "necessary_condition_general", "necessary_condition_two_modes",
    "one_layer_zero_init_condition", "synthesize_exact", "synthesize_sampled", "time_at",
    "time_to_minimum", "time_to_target", "total_error", "true_weight", "z_general",
]
