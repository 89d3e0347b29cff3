"""Inflection points of per-mode error curves, necessary conditions for
epoch-wise double descent, and a curve-level detector."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .closed_form import GAMMA_ZERO, time_at, time_to_minimum
from .errors import InactiveMode, RegimeError, TooFewSamples
from .generalisation import ErrorCurve
from .spectral import ModeParams, classify_activity, global_minimum, true_weight

MIN_DETECTOR_SAMPLES = 256


class Side(enum.Enum):
    BEFORE_MIN = "BeforeMin"
    AFTER_MIN = "AfterMin"


class Scenario(enum.Enum):
    FIRST = "FirstScenario"
    SECOND = "SecondScenario"
    BOTH = "Both"
    NEITHER = "Neither"


def _num(x: float):
    """JSON-safe float: infinities become strings."""
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@dataclass(frozen=True)
class InflectionPoint:
    t_hat: float
    z_hat: float
    side: Side


@dataclass(frozen=True)
class InflectionReport:
    mode_index: int
    points: tuple[InflectionPoint, ...]
    t_min: float
    discriminant: float
    routh_sign_changes: Optional[int]

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: p.t_hat))
        object.__setattr__(self, "points", pts)
        if len(pts) > 3 or sum(p.side is Side.BEFORE_MIN for p in pts) > 2:
            raise ValueError(f"inflection count out of range: {pts}")

    def times(self, side: Optional[Side] = None) -> list[float]:
        return [p.t_hat for p in self.points if side is None or p.side is side]

    def to_dict(self) -> dict:
        return {
            "mode_index": self.mode_index,
            "points": [{"t_hat": _num(p.t_hat), "z_hat": _num(p.z_hat), "side": p.side.value}
                       for p in self.points],
            "t_min": _num(self.t_min),
            "discriminant": _num(self.discriminant),
            "routh_sign_changes": self.routh_sign_changes,
        }


@dataclass(frozen=True)
class DDVerdict:
    detected: bool
    first_min_t: Optional[float]
    peak_t: Optional[float]
    second_min_t: Optional[float]
    prominence: float  # relative to the curve's range
    necessary_condition_holds: Optional[bool] = None
    witness: Optional[tuple[int, float]] = None

    def to_dict(self) -> dict:
        return {
            "detected": self.detected,
            "first_min_t": _num(self.first_min_t),
            "peak_t": _num(self.peak_t),
            "second_min_t": _num(self.second_min_t),
            "prominence": _num(self.prominence),
            "necessary_condition_holds": self.necessary_condition_holds,
            "witness": None if self.witness is None else
            {"mode_index": self.witness[0], "t_hat": _num(self.witness[1])},
        }


# ------------------------------------------------------------------ cubic

def cubic_coefficients(mode: ModeParams) -> tuple[float, float, float, float]:
    """Coefficients of the cubic whose roots are the candidate inflection weights."""
    lam, sig, rho = mode.lam, mode.sigma, mode.rho
    g2, e2 = mode.gamma ** 2, mode.eta ** 2
    return (12.0 * lam ** 2 * e2,
            -8.0 * e2 * lam * sig * (2.0 - rho),
            2.0 * (g2 * lam ** 2 + 2.0 * e2 * sig ** 2 * (1.0 - rho)),
            -g2 * lam * sig * (2.0 - rho))


def discriminant(a: float, b: float, c: float, d: float) -> float:
    return 18 * a * b * c * d - 4 * a * c ** 3 - 27 * a ** 2 * d ** 2 + b ** 2 * c ** 2 - 4 * b ** 3 * d


def cubic_discriminant(mode: ModeParams) -> float:
    return discriminant(*cubic_coefficients(mode))


def routh_sign_changes(a: float, b: float, c: float, d: float) -> Optional[int]:
    """Sign changes in the first Routh column; None when the table is degenerate."""
    if a == 0 or b == 0:
        return None
    column = [a, b, (b * c - d * a) / b, d]
    signs = [np.sign(x) for x in column if x != 0]
    return int(sum(s1 != s2 for s1, s2 in zip(signs, signs[1:])))


def solve_cubic(a: float, b: float, c: float, d: float) -> list[float]:
    """Real roots of a x^3 + b x^2 + c x + d, sorted, repeated roots repeated.

    Trigonometric form when three roots are real, Cardano otherwise, then
    one Newton step per root.
    """
    if a == 0:
        if b == 0:
            return [] if c == 0 else [-d / c]
        disc = c * c - 4 * b * d
        if disc < 0:
            return []
        sq = math.sqrt(disc)
        q = -0.5 * (c + math.copysign(sq, c))
        roots = [q / b] + ([d / q] if q != 0 else [])
        return sorted(roots)
    p, q, r = b / a, c / a, d / a
    P = q - p * p / 3.0
    Q = 2.0 * p ** 3 / 27.0 - p * q / 3.0 + r
    D = (Q / 2.0) ** 2 + (P / 3.0) ** 3
    shift = -p / 3.0
    if P == 0 and Q == 0:
        ys = [0.0, 0.0, 0.0]
    elif D > 0:
        A = -math.copysign(np.cbrt(abs(Q) / 2.0 + math.sqrt(D)), Q)
        ys = [A - P / (3.0 * A)] if A != 0 else [0.0]
    else:
        mag = 2.0 * math.sqrt(-P / 3.0)
        arg = (3.0 * Q / (2.0 * P)) * math.sqrt(-3.0 / P)
        theta = math.acos(max(-1.0, min(1.0, arg)))
        ys = [mag * math.cos(theta / 3.0 - 2.0 * math.pi * k / 3.0) for k in range(3)]

    def f(x):
        return ((a * x + b) * x + c) * x + d

    def fp(x):
        return (3 * a * x + 2 * b) * x + c

    roots = []
    for y in ys:
        x = y + shift
        dx = fp(x)
        if dx != 0:
            x_new = x - f(x) / dx
            if abs(f(x_new)) <= abs(f(x)):
                x = x_new
        roots.append(x)
    return sorted(roots)


def accept_root(coeffs: Sequence[float], x: float, rtol: float = 1e-10) -> bool:
    a, b, c, d = coeffs
    scale = max(abs(a), abs(b), abs(c), abs(d))
    return abs(((a * x + b) * x + c) * x + d) <= rtol * scale * max(1.0, abs(x) ** 3)


def error_second_derivative(mode: ModeParams, z):
    """d^2/dt^2 of ((1-rho) sigma - lambda z)^2 along the flow, as a function of z."""
    z = np.asarray(z, dtype=float)
    lam, sig = mode.lam, mode.sigma
    zbar = true_weight(mode)
    e2 = mode.eta ** 2
    inner = (mode.gamma ** 2 + 4 * e2 * z * z) * (sig + lam * zbar - 2 * lam * z) \
        - 4 * e2 * z * (zbar - z) * (sig - lam * z)
    return 2.0 * lam ** 2 * (sig - lam * z) * inner


# ------------------------------------------------------------------ inflections

def _side(mode: ModeParams, z_hat: float) -> Side:
    return Side.BEFORE_MIN if z_hat < true_weight(mode) else Side.AFTER_MIN


def _report(mode: ModeParams, index: int, points) -> InflectionReport:
    coeffs = cubic_coefficients(mode)
    return InflectionReport(index, tuple(points), time_to_minimum(mode), discriminant(*coeffs),
                            routh_sign_changes(*coeffs))


def _require_active(mode: ModeParams) -> None:
    if not classify_activity(mode).active:
        raise InactiveMode("inflection analysis needs an active mode")


def inflection_one_layer(mode: ModeParams, index: int = 0) -> InflectionReport:
    if mode.eta != 0 or mode.gamma == 0:
        raise RegimeError("one-layer inflections need eta = 0 and gamma != 0")
    _require_active(mode)
    lam, sig, rho = mode.lam, mode.sigma, mode.rho
    points = []
    if rho > 0:
        t = math.log(2.0 * (sig - lam * mode.z0) / (sig * rho)) / (abs(mode.gamma) * lam)
        points.append(InflectionPoint(t, sig * (2.0 - rho) / (2.0 * lam), Side.AFTER_MIN))
    return _report(mode, index, points)


def balanced_inflection_weights(mode: ModeParams) -> tuple[float, Optional[float]]:
    """(z_minus, z_plus) for gamma = 0; z_plus is None when rho = 0."""
    lam, sig, rho = mode.lam, mode.sigma, mode.rho
    if rho == 0:
        return sig / (3.0 * lam), None
    s = math.sqrt(rho * rho - rho + 1.0)
    return sig * (2 - rho - s) / (3 * lam), sig * (2 - rho + s) / (3 * lam)


def inflection_balanced(mode: ModeParams, index: int = 0) -> InflectionReport:
    if abs(mode.gamma) >= GAMMA_ZERO or mode.eta <= 0:
        raise RegimeError("balanced inflections need gamma = 0 and eta > 0")
    if mode.rho >= 1:
        raise RegimeError("balanced inflections need rho < 1")
    _require_active(mode)
    lam, sig, rho, z0, eta = mode.lam, mode.sigma, mode.rho, mode.z0, mode.eta
    z_minus, z_plus = balanced_inflection_weights(mode)
    points = []
    if rho == 0:
        if z0 < z_minus:
            t = math.log((sig - lam * z0) / (2 * lam * z0)) / (2 * eta * sig)
            points.append(InflectionPoint(t, z_minus, Side.BEFORE_MIN))
    else:
        s = math.sqrt(rho * rho - rho + 1.0)
        if z0 < z_minus:
            t = math.log((sig - lam * z0) * (1 - s) / (lam * rho * z0)) / (2 * eta * sig)
            points.append(InflectionPoint(t, z_minus, Side.BEFORE_MIN))
        t = math.log((sig - lam * z0) * (1 + s) / (lam * rho * z0)) / (2 * eta * sig)
        points.append(InflectionPoint(t, z_plus, Side.AFTER_MIN))
    return _report(mode, index, points)


def inflection_general(mode: ModeParams, index: int = 0) -> InflectionReport:
    if abs(mode.gamma) < GAMMA_ZERO or mode.eta <= 0:
        raise RegimeError("general inflections need gamma != 0 and eta > 0")
    _require_active(mode)
    coeffs = cubic_coefficients(mode)
    zstar = global_minimum(mode)
    roots = [x for x in solve_cubic(*coeffs) if accept_root(coeffs, x)]
    points = []
    for k, z_hat in enumerate(roots):
        if not mode.z0 < z_hat < zstar:
            continue
        if any(abs(z_hat - other) == 0 for j, other in enumerate(roots) if j != k):
            continue  # exact repeated root: no sign change
        gaps = [abs(z_hat - other) for j, other in enumerate(roots) if j != k]
        gaps += [z_hat - mode.z0, zstar - z_hat]
        delta = min([1e-7 * zstar] + [0.25 * g for g in gaps if g > 0])
        lo, hi = error_second_derivative(mode, [z_hat - delta, z_hat + delta])
        if lo * hi < 0:
            points.append(InflectionPoint(time_at(mode, z_hat), z_hat, _side(mode, z_hat)))
    return _report(mode, index, points)


def inflections(mode: ModeParams, index: int = 0) -> InflectionReport:
    """Dispatch on the (gamma, eta) regime of an active mode."""
    if mode.eta == 0:
        return inflection_one_layer(mode, index)
    if abs(mode.gamma) < GAMMA_ZERO:
        return inflection_balanced(mode, index)
    return inflection_general(mode, index)


# ------------------------------------------------------------------ necessary conditions

def necessary_condition_general(modes: Sequence[ModeParams]) -> tuple[bool, Optional[tuple[int, float]]]:
    """Is there an inflection strictly between the earliest and latest per-mode minimum?

    Inactive modes are skipped; indices in the witness refer to ``modes``.
    """
    active = [i for i, m in enumerate(modes) if classify_activity(m).active]
    if not active:
        raise InactiveMode("need at least one active mode")
    t_mins = {i: time_to_minimum(modes[i]) for i in active}
    lo, hi = min(t_mins.values()), max(t_mins.values())
    if not lo < hi:
        return False, None
    for i in active:
        for t_hat in inflections(modes[i], i).times():
            if lo < t_hat < hi:
                return True, (i, t_hat)
    return False, None


def necessary_condition_two_modes(mode_i: ModeParams, mode_j: ModeParams) -> tuple[bool, Scenario]:
    """Two-mode form: which of the two scenarios could produce double descent.

    The modes are put in order of their minimum time first.
    """
    for m in (mode_i, mode_j):
        _require_active(m)
    t_i, t_j = time_to_minimum(mode_i), time_to_minimum(mode_j)
    if t_i > t_j:
        mode_i, mode_j, t_i, t_j = mode_j, mode_i, t_j, t_i
    if t_i == t_j:
        return False, Scenario.NEITHER
    before_j = inflections(mode_j).times(Side.BEFORE_MIN)
    after_i = inflections(mode_i).times(Side.AFTER_MIN)
    first = bool(before_j) and t_i < max(before_j)
    second = bool(after_i) and min(after_i) < t_j
    if first and second:
        return True, Scenario.BOTH
    if first:
        return True, Scenario.FIRST
    if second:
        return True, Scenario.SECOND
    return False, Scenario.NEITHER


def one_layer_zero_init_condition(mode_i: ModeParams, mode_j: ModeParams) -> bool:
    """log(2/rho_i) <= (lambda_i/lambda_j) log(1/rho_j), with mode_i reaching its minimum first."""
    for m in (mode_i, mode_j):
        if m.eta != 0 or m.z0 != 0:
            raise RegimeError("condition needs eta = 0 and z0 = 0 for both modes")
    if mode_i.gamma != mode_j.gamma or mode_i.gamma == 0:
        raise RegimeError("condition needs a shared nonzero gamma")
    if mode_i.rho == 0:
        return False
    rhs = math.inf if mode_j.rho == 0 else (mode_i.lam / mode_j.lam) * math.log(1.0 / mode_j.rho)
    return math.log(2.0 / mode_i.rho) <= rhs


# ------------------------------------------------------------------ detector

def detect_double_descent(curve: ErrorCurve, prominence_rel: float = 0.01,
                          modes: Optional[Sequence[ModeParams]] = None) -> DDVerdict:
    """Look for descent, rise and a second descent.

    A peak p counts when both its rise above the lowest earlier point and its
    drop to the lowest later point reach ``prominence_rel`` times the curve's
    range, and that earlier low point is itself preceded by higher values.
    The strongest such peak is reported.
    """
    v = np.asarray(curve.values, dtype=float)
    t = np.asarray(curve.times, dtype=float)
    if v.size < MIN_DETECTOR_SAMPLES:
        raise TooFewSamples(f"{v.size} samples, need at least {MIN_DETECTOR_SAMPLES}")
    holds, witness = None, None
    if modes is not None:
        if any(classify_activity(m).active for m in modes):
            holds, witness = necessary_condition_general(modes)
        else:
            holds = False
    span = float(v.max() - v.min())
    if not span > 1e-14 * max(1.0, float(np.abs(v).max())):
        return DDVerdict(False, None, None, None, 0.0, holds, witness)

    idx = np.arange(v.size)
    prefix_min = np.minimum.accumulate(v)
    new_min = v < np.concatenate([[np.inf], prefix_min[:-1]])
    prefix_arg = np.maximum.accumulate(np.where(new_min, idx, 0))
    suffix_min = np.minimum.accumulate(v[::-1])[::-1]

    peaks = idx[1:-1]
    rise = v[peaks] - prefix_min[peaks - 1]
    fall = v[peaks] - suffix_min[peaks + 1]
    score = np.minimum(rise, fall)
    score[prefix_arg[peaks - 1] == 0] = -np.inf  # the first low point must follow a descent
    best = int(np.argmax(score))
    prominence = float(max(score[best], 0.0) / span)
    if score[best] <= 0 or score[best] < prominence_rel * span:
        return DDVerdict(False, None, None, None, prominence, holds, witness)
    p = int(peaks[best])
    i1 = int(prefix_arg[p - 1])
    i3 = p + 1 + int(np.argmin(v[p + 1:]))
    return DDVerdict(True, float(t[i1]), float(t[p]), float(t[i3]), prominence, holds, witness)
