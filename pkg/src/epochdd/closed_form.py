"""Exact trajectories z(t) of a decoupled mode and their inverse t(z).

All evaluators accept a scalar or an array of times and return the same
shape.  The general solution is evaluated in terms of ``u = exp(-r t) / C``,
which stays in [0, 1/C] and therefore never overflows.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InactiveMode, OutOfBranch, RegimeError, TargetBehind
from .spectral import ModeParams, classify_activity, effective_rate, global_minimum

# |gamma| below this is treated as balanced.
GAMMA_ZERO = 1e-12
# r*t beyond this uses the leading-order tail.
TAIL_RT = 350.0


class Branch(enum.Enum):
    GENERAL = "General"
    ONE_LAYER = "OneLayer"
    BALANCED = "Balanced"
    FIXED_POINT = "FixedPoint"
    CONSTANT = "Constant"


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    z: float


def branch(mode: ModeParams) -> Branch:
    """Which evaluator z_general dispatches to."""
    if mode.lam <= 0:
        raise OutOfBranch("closed form needs lambda > 0")
    zstar = global_minimum(mode)
    if mode.z0 == zstar:
        return Branch.FIXED_POINT
    if mode.z0 > zstar:
        raise OutOfBranch(f"z0={mode.z0!r} above sigma/lambda={zstar!r} is not covered")
    if mode.eta == 0:
        return Branch.CONSTANT if mode.gamma == 0 else Branch.ONE_LAYER
    if abs(mode.gamma) < GAMMA_ZERO:
        if mode.z0 < 0:
            raise OutOfBranch("balanced dynamics with z0 < 0 never grow")
        return Branch.CONSTANT if mode.z0 == 0 else Branch.BALANCED
    return Branch.GENERAL


def _G(mode: ModeParams, z):
    """exp(r t) * C along the trajectory; t(z) = log(G(z)/G(z0)) / r."""
    g2, e2 = mode.gamma ** 2, mode.eta ** 2
    r = effective_rate(mode)
    lam, sig = mode.lam, mode.sigma
    z = np.asarray(z, dtype=float)
    return (r * np.sqrt(g2 + 4 * e2 * z * z) + g2 * lam + 4 * e2 * sig * z) / (lam * (sig - lam * z))


def constant_C(mode: ModeParams) -> float:
    if mode.lam <= 0:
        raise OutOfBranch("constant C needs lambda > 0")
    if mode.z0 >= mode.sigma / mode.lam:
        raise OutOfBranch(f"z0={mode.z0!r} is not below sigma/lambda")
    return float(_G(mode, mode.z0))


def _as_times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("times must be nonnegative")
    return arr


def _general(mode: ModeParams, t: np.ndarray) -> np.ndarray:
    lam, sig = mode.lam, mode.sigma
    g2, e2 = mode.gamma ** 2, mode.eta ** 2
    r = effective_rate(mode)
    C = constant_C(mode)
    rt = r * t
    u = np.exp(-rt) / C
    denom = 1.0 + 8.0 * e2 * sig * u / lam ** 2 - 4.0 * g2 * e2 * u * u / lam ** 2
    gap = 2.0 * r * r * u / (lam ** 3 * denom)
    tail = 2.0 * r * r * u / lam ** 3
    gap = np.where(rt > TAIL_RT, tail, gap)
    return sig / lam - gap


def z_one_layer(mode: ModeParams, t):
    if mode.eta != 0:
        raise RegimeError("one-layer solution needs eta = 0")
    if mode.gamma == 0:
        raise InactiveMode("gamma = 0 and eta = 0: the mode does not move")
    t = _as_times(t)
    zstar = global_minimum(mode)
    # z0 plus the covered fraction of the gap; exact at t = 0
    return mode.z0 - np.expm1(-abs(mode.gamma) * mode.lam * t) * (zstar - mode.z0)


def z_balanced(mode: ModeParams, t):
    if mode.gamma != 0 and abs(mode.gamma) >= GAMMA_ZERO:
        raise RegimeError("balanced solution needs gamma = 0")
    if mode.eta <= 0:
        raise RegimeError("balanced solution needs eta > 0")
    if mode.z0 <= 0:
        raise InactiveMode("balanced dynamics started at z0 <= 0 do not grow")
    t = _as_times(t)
    lam, sig, z0 = mode.lam, mode.sigma, mode.z0
    if z0 >= sig / lam:
        raise OutOfBranch("balanced solution needs z0 < sigma/lambda")
    # logistic form with the exponential moved to the denominator
    return sig * z0 / (lam * z0 + (sig - lam * z0) * np.exp(-2.0 * mode.eta * sig * t))


def z_general(mode: ModeParams, t):
    """z(t) for any mode with z0 <= sigma/lambda, dispatching to the stable special cases."""
    t = _as_times(t)
    kind = branch(mode)
    if kind in (Branch.FIXED_POINT, Branch.CONSTANT):
        return np.full_like(t, mode.z0)
    if kind is Branch.ONE_LAYER:
        return z_one_layer(mode, t)
    if kind is Branch.BALANCED:
        return z_balanced(mode, t)
    return _general(mode, t)


def z_dot(mode: ModeParams, z):
    """Right-hand side of the scalar flow."""
    z = np.asarray(z, dtype=float)
    return np.sqrt(mode.gamma ** 2 + 4 * mode.eta ** 2 * z * z) * (mode.sigma - mode.lam * z)


def z_ddot(mode: ModeParams, z):
    """Second time derivative of z along the flow, as a function of z."""
    z = np.asarray(z, dtype=float)
    g2, e2 = mode.gamma ** 2, mode.eta ** 2
    s = np.sqrt(g2 + 4 * e2 * z * z)
    resid = mode.sigma - mode.lam * z
    dfdz = 4 * e2 * z * resid / np.where(s > 0, s, 1.0) - mode.lam * s
    return dfdz * s * resid


def time_at(mode: ModeParams, z: float) -> float:
    """Flow time at which the trajectory reaches ``z`` (z0 <= z < sigma/lambda)."""
    if not classify_activity(mode).active:
        raise InactiveMode("time to a target is only defined for active modes")
    zstar = global_minimum(mode)
    if z < mode.z0:
        raise TargetBehind(f"target {z!r} lies below z0={mode.z0!r}")
    if z >= zstar:
        return math.inf
    if z == mode.z0:
        return 0.0
    if mode.eta == 0:
        return math.log((zstar - mode.z0) / (zstar - z)) / (abs(mode.gamma) * mode.lam)
    if abs(mode.gamma) < GAMMA_ZERO:
        # inverse of the logistic form
        lam, sig, z0 = mode.lam, mode.sigma, mode.z0
        ratio = z * (sig - lam * z0) / (z0 * (sig - lam * z))
        return math.log(ratio) / (2.0 * mode.eta * sig)
    return math.log(float(_G(mode, z) / _G(mode, mode.z0))) / effective_rate(mode)


def time_to_target(mode: ModeParams, rho_target: float) -> float:
    """Time at which z first reaches (1 - rho_target) * sigma / lambda; +inf for rho_target = 0."""
    if not 0.0 <= rho_target <= 1.0:
        raise ValueError("rho_target must lie in [0, 1]")
    if not classify_activity(mode).active:
        raise InactiveMode("time to a target is only defined for active modes")
    if rho_target == 0:
        return math.inf
    target = (1.0 - rho_target) * global_minimum(mode)
    return time_at(mode, target)


def time_to_minimum(mode: ModeParams) -> float:
    """Time at which the mode's error term is minimal."""
    return time_to_target(mode, mode.rho)
