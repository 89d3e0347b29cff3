"""Decoupled mode parameters and the elementary quantities derived from them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import ConditionViolation, DegenerateMode, ParameterError, RankViolation


@dataclass(frozen=True)
class ModeParams:
    """One decoupled diagonal weight.

    ``lam`` is the input-covariance eigenvalue, ``sigma`` the input-output
    singular value, ``gamma`` the conserved layer imbalance and ``rho`` places
    the noisy optimum at ``(1 - rho) * sigma / lam``.
    """

    lam: float
    sigma: float
    eta_a: float
    eta_b: float
    gamma: float
    z0: float
    rho: float
    multiplicity: int = 1

    def __post_init__(self):
        for name in ("lam", "sigma", "eta_a", "eta_b", "gamma", "z0", "rho"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        for name in ("lam", "sigma", "eta_a", "eta_b"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        if not 0.0 <= self.rho <= 1.0:
            raise ParameterError(f"rho must lie in [0, 1], got {self.rho!r}")
        if int(self.multiplicity) != self.multiplicity or self.multiplicity < 1:
            raise ParameterError(f"multiplicity must be a positive integer, got {self.multiplicity!r}")

    @property
    def eta(self) -> float:
        return math.sqrt(self.eta_a * self.eta_b)

    @classmethod
    def from_eta(cls, lam, sigma, eta, gamma, z0, rho, multiplicity=1) -> "ModeParams":
        """Both layers share the rate ``eta``; only eta and gamma enter the z-dynamics."""
        return cls(lam, sigma, eta, eta, gamma, z0, rho, multiplicity)

    @classmethod
    def from_ab(cls, a0, b0, lam, sigma, eta_a, eta_b, rho, multiplicity=1) -> "ModeParams":
        """Build a mode from scalar layer projections; gamma is derived."""
        return cls(lam, sigma, eta_a, eta_b, conserved_gamma(a0, b0, eta_a, eta_b),
                   a0 * b0, rho, multiplicity)

    def with_(self, **changes) -> "ModeParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ModeState:
    a: float
    b: float
    t: float

    @property
    def z(self) -> float:
        return self.a * self.b


class Reason(enum.Enum):
    ZERO_SIGMA = "ZeroSigma"
    ZERO_EFFECTIVE_RATE = "ZeroEffectiveRate"
    FIXED_POINT_INIT = "FixedPointInit"
    ACTIVE = "Active"


@dataclass(frozen=True)
class ActivityStatus:
    active: bool
    reason: Reason

    def __post_init__(self):
        if self.active != (self.reason is Reason.ACTIVE):
            raise ParameterError("active must coincide with reason == Active")


def conserved_gamma(a0: float, b0: float, eta_a: float, eta_b: float) -> float:
    return eta_b * a0 * a0 - eta_a * b0 * b0


def effective_rate(mode: ModeParams) -> float:
    return math.sqrt(mode.gamma ** 2 * mode.lam ** 2 + 4.0 * mode.eta ** 2 * mode.sigma ** 2)


def global_minimum(mode: ModeParams) -> float:
    if mode.lam == 0:
        raise DegenerateMode("global minimum needs lambda > 0")
    return mode.sigma / mode.lam


def true_weight(mode: ModeParams) -> float:
    return (1.0 - mode.rho) * global_minimum(mode)


def check_conditions(mode: ModeParams) -> None:
    """Raise if the mode breaks the rank inequality or conditions (i)-(ii).

    Condition (ii) (rho in [0, 1]) is already a constructor invariant.
    """
    if mode.lam == 0:
        if mode.sigma > 0:
            raise RankViolation(f"sigma={mode.sigma!r} > 0 with lambda = 0")
        if mode.z0 != 0:
            raise ConditionViolation("i", f"z0={mode.z0!r} must be 0 when lambda = sigma = 0")
        return
    zbar = true_weight(mode)
    if not 0.0 <= mode.z0 <= zbar:
        raise ConditionViolation("i", f"z0={mode.z0!r} outside [0, zbar={zbar!r}]")


def classify_activity(mode: ModeParams) -> ActivityStatus:
    check_conditions(mode)
    if mode.sigma == 0:
        return ActivityStatus(False, Reason.ZERO_SIGMA)
    if effective_rate(mode) == 0:
        return ActivityStatus(False, Reason.ZERO_EFFECTIVE_RATE)
    if (mode.gamma == 0 and mode.z0 == 0) or (mode.rho == 0 and mode.z0 == global_minimum(mode)):
        return ActivityStatus(False, Reason.FIXED_POINT_INIT)
    return ActivityStatus(True, Reason.ACTIVE)


def is_active(mode: ModeParams) -> bool:
    return classify_activity(mode).active
