"""Approximate multi-layer dynamics dz/dt = (L/2) rate z^2 (sigma - lambda z) and
the layerwise flow it approximates.

The printed approximation puts gamma inside the rate to the first power;
``square_gamma=True`` uses gamma^2 instead.  For gamma = 0 the two coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analysis import InflectionPoint, InflectionReport, Side
from .errors import ParameterError, RegimeError, UnstableStep
from .numerics import IntegratorConfig, Method, Trajectory, _step, solve
from .spectral import ModeParams, check_conditions, global_minimum, true_weight

Z_TOL = 1e-9


@dataclass(frozen=True)
class DeepModeParams:
    """A mode of an L-layer network; ``base.eta_a``/``base.eta_b`` are the first/last group rates."""

    base: ModeParams
    L: int
    square_gamma: bool = False

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise ParameterError(f"depth must be an even integer >= 2, got {self.L!r}")

    @property
    def eta_first_group(self) -> float:
        return self.base.eta_a

    @property
    def eta_last_group(self) -> float:
        return self.base.eta_b

    @property
    def large_depth(self) -> bool:
        return self.L >= 4

    @property
    def rate(self) -> float:
        g = self.base.gamma ** 2 if self.square_gamma else self.base.gamma
        inner = g + 4.0 * self.base.eta ** 2
        if inner < 0:
            raise ParameterError(f"gamma + 4 eta^2 = {inner!r} is negative")
        return math.sqrt(inner)

    @property
    def prefactor(self) -> float:
        """(L/2) * rate: dz/dt = prefactor * z^2 (sigma - lambda z)."""
        return 0.5 * self.L * self.rate

    def stiffness(self) -> float:
        """Largest |d(dz/dt)/dz| on [0, sigma/lambda]."""
        b = self.base
        return self.prefactor * b.sigma ** 2 / b.lam if b.lam > 0 else self.prefactor


def deep_rhs(mode: DeepModeParams, z):
    z = np.asarray(z, dtype=float)
    return mode.prefactor * z * z * (mode.base.sigma - mode.base.lam * z)


def elapsed_time(mode: DeepModeParams, z: float) -> float:
    """Time for the approximate flow to carry z0 to z, from the partial-fraction integral.

    Used for choosing horizons and as an independent check on the integrator.
    """
    b = mode.base
    z0, sig, lam = b.z0, b.sigma, b.lam

    def F(x):
        return -1.0 / (sig * x) + (lam / sig ** 2) * math.log(x / (sig - lam * x))

    return (F(z) - F(z0)) / mode.prefactor


@dataclass(frozen=True)
class DeepTrajectory:
    """Dense RK4 samples plus the means to evaluate between them."""

    times: np.ndarray
    values: np.ndarray
    mode: DeepModeParams
    step: float

    def z_at(self, t: float) -> float:
        """Nearest earlier sample advanced by one partial RK4 step."""
        if t <= 0:
            return float(self.values[0])
        k = min(int(np.searchsorted(self.times, t, side="right")) - 1, self.times.size - 1)
        dt = t - self.times[k]
        z = np.array([self.values[k]])
        if dt > 0:
            z = _step(lambda y: deep_rhs(self.mode, y), z, dt, Method.RK4)
        return float(z[0])

    def time_at(self, z_target: float, tol: float = Z_TOL) -> float:
        """Bisection on z_at; +inf if the target is never reached within the trajectory."""
        v = self.values
        if z_target <= v[0]:
            return 0.0
        k = int(np.searchsorted(v, z_target, side="left"))
        if k >= v.size:
            return math.inf
        lo, hi = float(self.times[k - 1]), float(self.times[k])
        # Bisect to (near) machine precision in t; the result then meets tol in z
        # up to the RK4 error of the trajectory itself.
        while hi - lo > 4 * np.finfo(float).eps * hi:
            mid = 0.5 * (lo + hi)
            z = self.z_at(mid)
            if z == z_target:
                return mid
            if z < z_target:
                lo = mid
            else:
                hi = mid
        mid = 0.5 * (lo + hi)
        if abs(self.z_at(mid) - z_target) > tol:
            raise ArithmeticError(f"bisection missed z={z_target!r} by more than {tol!r}")
        return mid


def _check_deep_active(mode: DeepModeParams) -> None:
    b = mode.base
    check_conditions(b)
    if b.z0 <= 0:
        raise RegimeError("deep dynamics need z0 > 0")
    if mode.rate <= 0:
        raise RegimeError("deep dynamics need a positive effective rate")


def default_deep_config(mode: DeepModeParams, steps_per_unit: float = 100.0, settle: float = 1e-4) -> IntegratorConfig:
    b = mode.base
    k = mode.stiffness()
    zstar = global_minimum(b)
    horizon = elapsed_time(mode, zstar - settle * (zstar - b.z0)) if b.z0 < zstar else 1.0 / k
    return IntegratorConfig(1.0 / (steps_per_unit * k), 1.1 * horizon)


def integrate_deep_scalar(mode: DeepModeParams, cfg: Optional[IntegratorConfig] = None) -> DeepTrajectory:
    b = mode.base
    if mode.rate < 0:
        raise ParameterError("negative rate")
    if b.lam <= 0:
        raise RegimeError("deep dynamics need lambda > 0")
    if b.z0 == 0 or b.z0 == global_minimum(b):
        t_max = cfg.t_max if cfg else 1.0
        return DeepTrajectory(np.array([0.0, t_max]), np.array([b.z0, b.z0]), mode, t_max)
    cfg = cfg or default_deep_config(mode)
    if cfg.step > 0.1 / mode.stiffness():
        raise UnstableStep(f"step {cfg.step!r} exceeds 0.1/stiffness")
    zstar = global_minimum(b)

    def check(y):
        if b.z0 < zstar and y[0] - zstar > 1e-6:
            raise UnstableStep(f"deep trajectory overshot sigma/lambda: z={y[0]!r}")

    if cfg.sample_stride != 1:
        cfg = IntegratorConfig(cfg.step, cfg.t_max, cfg.method, 1)
    times, states = solve(lambda y: deep_rhs(mode, y), [b.z0], cfg, check=check)
    return DeepTrajectory(times, states[:, 0], mode, float(times[1] - times[0]))


@dataclass(frozen=True)
class LayerwiseTrajectory:
    times: np.ndarray
    layers: np.ndarray  # (k, L)

    @property
    def z(self) -> np.ndarray:
        return np.prod(self.layers, axis=1)


def grouped_init(L: int, z0: float, gamma: float, eta1: float, etaL: float) -> np.ndarray:
    """Per-layer values with product z0, first-half imbalance gamma against the last layer."""
    if z0 <= 0 or eta1 <= 0 or etaL <= 0:
        raise ParameterError("grouped init needs z0 > 0 and positive rates")
    aL2 = (-gamma + math.sqrt(gamma ** 2 + 4 * eta1 * etaL * z0 ** (4.0 / L))) / (2 * eta1)
    a12 = (gamma + eta1 * aL2) / etaL
    half = L // 2
    return np.concatenate([np.full(half, math.sqrt(a12)), np.full(half, math.sqrt(aL2))])


def layer_rates(L: int, eta1: float, etaL: float) -> np.ndarray:
    return np.concatenate([np.full(L // 2, eta1), np.full(L // 2, etaL)])


def _products_except(a: np.ndarray) -> np.ndarray:
    left = np.concatenate([[1.0], np.cumprod(a[:-1])])
    right = np.concatenate([np.cumprod(a[::-1][:-1])[::-1], [1.0]])
    return left * right


def integrate_deep_layerwise(L: int, a_init: Sequence[float], eta1: float, etaL: float,
                             lam: float, sigma: float, cfg: IntegratorConfig,
                             t_eval: Optional[Sequence[float]] = None) -> LayerwiseTrajectory:
    """da_l/dt = eta_l prod_{j != l} a_j (sigma - lambda prod_j a_j), two rate groups."""
    a0 = np.asarray(a_init, dtype=float)
    if L < 2 or L % 2 or a0.shape != (L,):
        raise ParameterError(f"need an even depth and {L} initial values")
    half = L // 2
    for group in (a0[:half], a0[half:]):
        if np.ptp(group ** 2) > 1e-12 * max(1.0, float(np.max(group ** 2))):
            raise ParameterError("layers within a group must share their squared initial value")
    eta = layer_rates(L, eta1, etaL)

    def f(y):
        others = _products_except(y)
        return eta * others * (sigma - lam * np.prod(y))

    def check(y):
        if not np.all(np.isfinite(y)):
            raise UnstableStep("non-finite layer state")

    times, states = solve(f, a0, cfg, t_eval, check)
    return LayerwiseTrajectory(times, states)


def deep_inflection_weights(mode: DeepModeParams) -> tuple[float, Optional[float]]:
    """(z_minus, z_plus) roots of the quadratic factor; z_plus is None for rho = 0."""
    b = mode.base
    rho = b.rho
    s = math.sqrt(9 * rho * rho - 4 * rho + 4)
    z_minus = b.sigma * (6 - 3 * rho - s) / (8 * b.lam)
    z_plus = b.sigma * (6 - 3 * rho + s) / (8 * b.lam) if rho > 0 else None
    return z_minus, z_plus


def deep_error_second_derivative(mode: DeepModeParams, z):
    """d^2/dt^2 of ((1-rho) sigma - lambda z)^2 along the approximate deep flow."""
    z = np.asarray(z, dtype=float)
    b = mode.base
    lam, sig, rho = b.lam, b.sigma, b.rho
    quad = 4 * lam ** 2 * z * z - 3 * lam * sig * (2 - rho) * z + 2 * sig ** 2 * (1 - rho)
    return -0.5 * mode.L ** 2 * mode.rate ** 2 * z ** 3 * (sig - lam * z) * quad


def deep_inflections(mode: DeepModeParams, trajectory: Optional[DeepTrajectory] = None,
                     index: int = 0) -> InflectionReport:
    """Inflection weights from the quadratic factor, times by bisection on the integrated curve."""
    b = mode.base
    if b.rho >= 1:
        raise RegimeError("deep inflections need rho < 1")
    _check_deep_active(mode)
    traj = trajectory or integrate_deep_scalar(mode)
    z_minus, z_plus = deep_inflection_weights(mode)
    points = []
    if b.z0 < z_minus:
        points.append(InflectionPoint(traj.time_at(z_minus), z_minus, Side.BEFORE_MIN))
    if z_plus is not None and b.z0 < z_plus:
        points.append(InflectionPoint(traj.time_at(z_plus), z_plus, Side.AFTER_MIN))
    t_min = math.inf if b.rho == 0 else traj.time_at(true_weight(b))
    disc = (b.lam * b.sigma) ** 2 * (9 * b.rho ** 2 - 4 * b.rho + 4)
    return InflectionReport(index, tuple(points), t_min, disc, None)
