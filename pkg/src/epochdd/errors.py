"""Exception hierarchy shared by every module."""

from __future__ import annotations


class EpochDDError(Exception):
    """Base class for all library errors."""


class ParameterError(EpochDDError, ValueError):
    """A parameter violates a type-level invariant (negative rate, rho outside [0, 1], ...)."""


class DegenerateMode(EpochDDError, ValueError):
    """A quantity needs lambda > 0 but the mode has lambda == 0."""


class ConditionViolation(EpochDDError, ValueError):
    """A mode breaks one of the analysis conditions (i)-(v).

    ``condition`` holds the roman numeral of the violated condition.
    """

    def __init__(self, condition: str, message: str):
        self.condition = condition
        super().__init__(f"condition ({condition}) violated: {message}")


class RankViolation(ConditionViolation):
    """sigma > 0 paired with lambda == 0; no dataset can realise this spectrum."""

    def __init__(self, message: str):
        super().__init__("iv", f"RankViolation: {message}")


class OutOfBranch(EpochDDError, ValueError):
    """z0 >= sigma/lambda: the closed form only covers increasing trajectories."""


class InactiveMode(EpochDDError, ValueError):
    """The requested quantity only exists for an active mode."""


class RegimeError(EpochDDError, ValueError):
    """The mode is outside the (gamma, eta) regime the routine handles."""


class TargetBehind(EpochDDError, ValueError):
    """The requested target weight lies below the initial weight."""


class UnstableStep(EpochDDError, RuntimeError):
    """Integrator step too large, or an overshoot was observed."""


class Diverged(EpochDDError, RuntimeError):
    """Discrete gradient descent blew up."""


class DimensionError(EpochDDError, ValueError):
    """Matrix shapes do not fit together."""


class CovarianceError(EpochDDError, ValueError):
    """A covariance matrix is not symmetric positive semi-definite."""


class InitError(EpochDDError, ValueError):
    """Initialisation vectors are not orthogonal or not unit length."""


class TooFewSamples(EpochDDError, ValueError):
    """A curve has too few samples for the detector."""


class ConfigError(EpochDDError, ValueError):
    """An experiment config could not be parsed or references unknown fields."""
