"""Random valid modes and independent numerical oracles.

Shared by the ``verify`` command and the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .closed_form import time_at
from .generalisation import mode_error
from .numerics import IntegratorConfig, integrate_scalar
from .spectral import ModeParams, effective_rate, global_minimum

REGIMES = ("one_layer", "balanced", "general")


def _logu(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def random_mode(rng: np.random.Generator, regime: Optional[str] = None,
                lam_range=(0.2, 5.0), sigma_range=(0.2, 5.0), multiplicity: int = 1) -> ModeParams:
    """An active mode satisfying conditions (i)-(v) in the requested (or a random) regime."""
    regime = regime or REGIMES[int(rng.integers(len(REGIMES)))]
    lam = _logu(rng, *lam_range)
    sigma = _logu(rng, *sigma_range)
    u = rng.uniform()
    if u < 0.1:
        rho = 0.0
    elif u < 0.15 and regime != "balanced":
        rho = 1.0
    else:
        rho = float(rng.uniform(0.02, 0.98))
    zbar = (1 - rho) * sigma / lam
    if regime == "balanced":
        z0 = zbar * float(rng.uniform(0.01, 0.95))
    else:
        z0 = 0.0 if rng.uniform() < 0.15 else zbar * float(rng.uniform(0.0, 0.95))
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    if regime == "one_layer":
        eta_b = _logu(rng, 1e-3, 1e-1)
        return ModeParams(lam, sigma, 0.0, eta_b, sign * _logu(rng, 1e-3, 1e-1), z0, rho, multiplicity)
    eta = _logu(rng, 1e-3, 1e-1)
    skew = math.exp(rng.uniform(-1.0, 1.0))
    eta_a, eta_b = eta * skew, eta / skew
    if regime == "balanced":
        return ModeParams(lam, sigma, eta_a, eta_b, 0.0, z0, rho, multiplicity)
    gamma = sign * _logu(rng, 0.01, 10.0) * 2 * eta * sigma / lam
    return ModeParams(lam, sigma, eta_a, eta_b, gamma, z0, rho, multiplicity)


def random_modes(seed: int, count: int, regime: Optional[str] = None, **kw) -> list[ModeParams]:
    rng = np.random.Generator(np.random.PCG64(seed))
    return [random_mode(rng, regime, **kw) for _ in range(count)]


def random_configuration(rng: np.random.Generator) -> list[ModeParams]:
    """2-4 modes sharing a regime, wide eigenvalue spread, multiplicities 1-9."""
    regime = REGIMES[int(rng.integers(len(REGIMES)))]
    k = int(rng.integers(2, 5))
    return [random_mode(rng, regime, lam_range=(0.2, 50.0), multiplicity=int(rng.integers(1, 10)))
            for _ in range(k)]


def rk4_reference(mode: ModeParams, times: Sequence[float], steps_per_unit: float = 100.0) -> np.ndarray:
    """z(t) by RK4 with step 1/(steps_per_unit * rate), landing exactly on ``times``."""
    r = effective_rate(mode)
    cfg = IntegratorConfig(1.0 / (steps_per_unit * r), float(np.max(times)) or 1.0)
    return integrate_scalar(mode, cfg, t_eval=times).values


# ----------------------------------------------------------- second differences

@dataclass(frozen=True)
class SignChange:
    t: float          # midpoint estimate
    halfwidth: float  # uncertainty from the grid (and any noise-floor gap)


def second_difference_sign_changes(times: np.ndarray, values: np.ndarray,
                                   noise: Optional[float] = None) -> list[SignChange]:
    """Convexity changes of a curve sampled on a uniform grid.

    Second differences below ``noise`` (default 64 eps max|v|) are treated as
    zero and skipped; a change across such a gap is reported with a wider
    uncertainty.
    """
    times = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    d2 = v[:-2] - 2 * v[1:-1] + v[2:]
    if noise is None:
        noise = 64 * np.finfo(float).eps * float(np.max(np.abs(v)))
    t_mid = times[1:-1]
    keep = np.flatnonzero(np.abs(d2) > noise)
    signs = np.sign(d2[keep])
    out = []
    for k in np.flatnonzero(signs[1:] != signs[:-1]):
        a, b = t_mid[keep[k]], t_mid[keep[k + 1]]
        out.append(SignChange(0.5 * (a + b), 0.5 * (b - a)))
    return out


def match_inflections(analytic: Sequence[float], oracle: Sequence[SignChange], h: float,
                      t_end: float) -> tuple[bool, str]:
    """Pair analytic inflection times with grid sign changes, each within one cell.

    Analytic points the grid cannot see are excused: two points closer than
    two cells (their sign changes cancel within the grid) or a point in the
    first or last cell.
    """
    remaining = sorted(analytic)
    unmatched_oracle = []
    for sc in oracle:
        tol = sc.halfwidth + h
        hits = [t for t in remaining if abs(t - sc.t) <= tol]
        if hits:
            best = min(hits, key=lambda t: abs(t - sc.t))
            remaining.remove(best)
        else:
            unmatched_oracle.append(sc.t)
    if unmatched_oracle:
        return False, f"grid sign changes without analytic partner at t={unmatched_oracle}"
    leftover = [t for t in remaining if h < t < t_end - h]
    leftover.sort()
    i, excused = 0, []
    while i < len(leftover):
        if i + 1 < len(leftover) and leftover[i + 1] - leftover[i] <= 2 * h:
            excused += leftover[i:i + 2]
            i += 2
        else:
            return False, f"analytic inflection at t={leftover[i]!r} not seen on the grid"
    return True, "ok" if not excused else f"ok (cancelling pair(s) {excused})"


def oracle_horizon(mode: ModeParams, z_marks: Sequence[float] = ()) -> float:
    """A time by which z is past every mark and 99% of the way to sigma/lambda."""
    zstar = global_minimum(mode)
    z_end = zstar - 1e-2 * (zstar - mode.z0)
    for z in z_marks:
        z_end = max(z_end, z + 0.5 * (zstar - z))
    return max(time_at(mode, z_end), 1e-6 / max(effective_rate(mode), 1e-300))


def grid_inflections(mode: ModeParams, t_end: float, points: int = 20001):
    """Uniform grid on [0, t_end] and the sign changes of mode_error's second difference."""
    t = np.linspace(0.0, t_end, points)
    return t, second_difference_sign_changes(t, mode_error(mode, t))


def tail_slope(mode: ModeParams, lo: float = 5.0, hi: float = 10.0, points: int = 200) -> float:
    """Least-squares slope of log|z* - z(t)| over t in [lo/r, hi/r]."""
    from .closed_form import z_general

    r = effective_rate(mode)
    t = np.linspace(lo / r, hi / r, points)
    gap = np.abs(global_minimum(mode) - z_general(mode, t))
    return float(np.polyfit(t, np.log(gap), 1)[0])
