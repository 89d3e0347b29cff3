"""Analytic and Monte-Carlo generalisation error.

Two normalisations appear: ``mode_error`` returns ((1-rho) sigma - lambda z)^2,
while totals weight each mode by 1/2 lambda (zbar - z)^2, which equals
``mode_error / (2 lambda)``.  Only the total uses the second form.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .closed_form import time_at, z_general
from .datagen import SpectralDataset, make_rng, psd_factor, true_synaptic_weights
from .spectral import (ModeParams, classify_activity, effective_rate, global_minimum,
                       true_weight)

DEFAULT_GRID_POINTS = 512


@dataclass(frozen=True)
class ErrorCurve:
    times: np.ndarray
    values: np.ndarray
    const_term: float
    per_mode: Optional[np.ndarray] = None  # (n_modes, n_times), unweighted by multiplicity

    def to_csv(self, path: str, mode_names: Optional[Sequence[str]] = None) -> None:
        write_curve_csv(path, self, mode_names)


class CurveShape(enum.Enum):
    MONOTONE_DECREASING = "MonotoneDecreasing"
    U_SHAPED = "UShaped"
    MONOTONE_INCREASING = "MonotoneIncreasing"
    CONSTANT = "Constant"


def _z(mode: ModeParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if not classify_activity(mode).active:
        return np.full_like(t, mode.z0)
    return z_general(mode, t)


def mode_error(mode: ModeParams, t):
    """((1 - rho) sigma - lambda z(t))^2; inactive modes give a constant."""
    return ((1.0 - mode.rho) * mode.sigma - mode.lam * _z(mode, t)) ** 2


def mode_component(mode: ModeParams, t):
    """1/2 lambda (zbar - z(t))^2, zero for lambda = 0."""
    t = np.asarray(t, dtype=float)
    if mode.lam == 0:
        return np.zeros_like(t)
    return 0.5 * mode.lam * (true_weight(mode) - _z(mode, t)) ** 2


def total_error(modes: Sequence[ModeParams], t_grid, const_term: float = 0.0) -> ErrorCurve:
    if const_term < 0:
        raise ValueError("const_term must be nonnegative")
    t = np.asarray(t_grid, dtype=float)
    comps = np.array([mode_component(m, t) for m in modes]).reshape(len(modes), t.size)
    weights = np.array([m.multiplicity for m in modes], dtype=float)
    values = weights @ comps + const_term if len(modes) else np.full(t.size, float(const_term))
    return ErrorCurve(t, values, float(const_term), comps)


def time_horizon(mode: ModeParams, horizon: float = 12.0, settle: float = 1e-4) -> float:
    """Latest time worth sampling for one active mode.

    At least ``horizon / r``; extended until z has covered all but ``settle``
    of the way from z0 to sigma/lambda, which matters for balanced modes
    started near zero.
    """
    r = effective_rate(mode)
    zstar = global_minimum(mode)
    t_settle = time_at(mode, zstar - settle * (zstar - mode.z0))
    return max(horizon / r, t_settle)


def default_time_grid(modes: Sequence[ModeParams], count: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Log-spaced grid from 1e-3 / (fastest rate) to the slowest mode's horizon."""
    active = [m for m in modes if classify_activity(m).active]
    if not active:
        return np.logspace(-3, 1, count)
    t_lo = 1e-3 / max(effective_rate(m) for m in active)
    t_hi = max(time_horizon(m) for m in active)
    return np.logspace(math.log10(t_lo), math.log10(t_hi), count)


def constant_error_term(dataset: Optional[SpectralDataset] = None,
                        inactive_modes: Sequence[ModeParams] = (),
                        zbar: Optional[np.ndarray] = None,
                        lambdas: Optional[np.ndarray] = None,
                        noise_cov: Optional[np.ndarray] = None) -> float:
    """Error that no active mode can remove.

    Sums the inactive modes' frozen error, the off-diagonal part of the true
    synaptic weights (weighted by the column eigenvalue) and half the noise
    trace.  Values not passed explicitly are taken from ``dataset``.
    """
    if dataset is not None:
        zbar = true_synaptic_weights(dataset) if zbar is None else zbar
        lambdas = dataset.Lambda if lambdas is None else lambdas
        noise_cov = dataset.noise_cov if noise_cov is None else noise_cov
    total = 0.0
    for mode in inactive_modes:
        if mode.lam > 0:
            total += 0.5 * mode.multiplicity * mode.lam * (true_weight(mode) - mode.z0) ** 2
    if zbar is not None:
        zbar = np.asarray(zbar, dtype=float)
        off = zbar.copy()
        k = min(off.shape)
        off[np.arange(k), np.arange(k)] = 0.0
        total += 0.5 * float(np.sum(off ** 2 * np.asarray(lambdas, dtype=float)[None, :]))
    if noise_cov is not None:
        total += 0.5 * float(np.trace(noise_cov))
    return total


def classify_mode_curve(mode: ModeParams) -> CurveShape:
    if not classify_activity(mode).active:
        return CurveShape.CONSTANT
    if mode.rho == 0:
        return CurveShape.MONOTONE_DECREASING
    if mode.rho >= 1.0 - mode.z0 * mode.lam / mode.sigma:
        return CurveShape.MONOTONE_INCREASING
    return CurveShape.U_SHAPED


def empirical_shape(values: np.ndarray, rtol: float = 1e-12) -> CurveShape:
    """Shape read off the signs of finite differences, ignoring steps below rtol * range."""
    values = np.asarray(values, dtype=float)
    span = values.max() - values.min()
    if span <= rtol * max(1.0, abs(values).max()):
        return CurveShape.CONSTANT
    d = np.diff(values)
    d = d[np.abs(d) > rtol * span]
    signs = np.sign(d)
    changes = np.flatnonzero(np.diff(signs) != 0)
    if changes.size == 0:
        return CurveShape.MONOTONE_INCREASING if signs[0] > 0 else CurveShape.MONOTONE_DECREASING
    if changes.size == 1 and signs[0] < 0:
        return CurveShape.U_SHAPED
    raise ValueError("curve is not monotone or U-shaped")


def analytic_expected_error(dataset: SpectralDataset, W: np.ndarray) -> float:
    """Exact 1/2 E||y - x W^T||^2 for Gaussian x and the dataset's true covariances."""
    D = np.asarray(dataset.Wbar) - np.asarray(W)
    return 0.5 * float(np.trace(D @ dataset.true_cov @ D.T) + np.trace(dataset.noise_cov))


def monte_carlo_error(dataset: SpectralDataset, W: np.ndarray, n_test: int, seed: int,
                      batch: int = 50_000) -> tuple[float, float]:
    """Estimate 1/2 E||y - x W^T||^2 from ``n_test`` fresh samples; returns (mean, std error)."""
    if n_test < 1:
        raise ValueError("n_test must be positive")
    rng = make_rng(seed)
    Ax = psd_factor(dataset.true_cov, "true_cov")
    Ae = psd_factor(dataset.noise_cov, "noise_cov")
    D = np.asarray(dataset.Wbar) - np.asarray(W)
    losses = np.empty(n_test)
    for start in range(0, n_test, batch):
        k = min(batch, n_test - start)
        x = rng.standard_normal((k, dataset.d_x)) @ Ax.T
        eps = rng.standard_normal((k, dataset.d_y)) @ Ae.T
        resid = x @ D.T + eps
        losses[start:start + k] = 0.5 * np.sum(resid * resid, axis=1)
    mean = float(losses.mean())
    se = float(losses.std(ddof=1) / math.sqrt(n_test)) if n_test > 1 else 0.0
    return mean, se


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


def write_curve_csv(path: str, curve: ErrorCurve, mode_names: Optional[Sequence[str]] = None) -> None:
    comps = curve.per_mode if curve.per_mode is not None else np.empty((0, curve.times.size))
    names = list(mode_names) if mode_names is not None else [f"mode_{i}" for i in range(len(comps))]
    if len(names) != len(comps):
        raise ValueError("one name per mode component is required")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "total", "const", *names])
        for k, t in enumerate(curve.times):
            w.writerow([fmt(t), fmt(curve.values[k]), fmt(curve.const_term), *(fmt(c[k]) for c in comps)])
