"""Brute-force reference integrators used as oracles for the closed forms.

RK4 and forward Euler are written out here rather than delegated to
``scipy.integrate``: the tests rely on a fixed step (for the order check)
and on landing exactly on requested sample times.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, Diverged, UnstableStep
from .spectral import ModeParams, ModeState, conserved_gamma, effective_rate


class Method(enum.Enum):
    RK4 = "RK4"
    EULER = "Euler"


@dataclass(frozen=True)
class IntegratorConfig:
    step: float
    t_max: float
    method: Method = Method.RK4
    sample_stride: int = 1

    def __post_init__(self):
        if not (self.step > 0 and self.t_max > 0):
            raise ValueError("step and t_max must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    @classmethod
    def for_rate(cls, rate: float, steps_per_unit: float = 100.0, horizon: float = 12.0,
                 method: Method = Method.RK4, sample_stride: int = 1) -> "IntegratorConfig":
        """Default config: step = 1/(steps_per_unit * rate), t_max = horizon / rate."""
        if rate <= 0:
            raise ValueError("rate must be positive")
        return cls(1.0 / (steps_per_unit * rate), horizon / rate, method, sample_stride)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class ABTrajectory:
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.a * self.b

    def gamma(self, eta_a: float, eta_b: float) -> np.ndarray:
        return conserved_gamma(self.a, self.b, eta_a, eta_b)

    def states(self) -> list[ModeState]:
        return [ModeState(float(a), float(b), float(t)) for t, a, b in zip(self.times, self.a, self.b)]


@dataclass(frozen=True)
class MatrixTrajectory:
    times: np.ndarray
    W1: np.ndarray  # (k, h, d_x)
    W2: np.ndarray  # (k, d_y, h)
    W: np.ndarray   # (k, d_y, d_x)
    losses: Optional[np.ndarray] = field(default=None)


Rhs = Callable[[np.ndarray], np.ndarray]


def _step(f: Rhs, y: np.ndarray, h: float, method: Method) -> np.ndarray:
    if method is Method.EULER:
        return y + h * f(y)
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def solve(f: Rhs, y0, cfg: IntegratorConfig, t_eval: Optional[Sequence[float]] = None,
          check: Optional[Callable[[np.ndarray], None]] = None) -> tuple[np.ndarray, np.ndarray]:
    """Integrate an autonomous system y' = f(y).

    Without ``t_eval`` the state is recorded every ``sample_stride`` steps of a
    uniform grid up to ``t_max``.  With ``t_eval`` (sorted, nonnegative) the
    integrator takes at most ``cfg.step`` per substep and lands exactly on each
    requested time.  ``check`` is called on every new state.
    """
    y = np.array(y0, dtype=float)
    if t_eval is None:
        n_steps = int(math.ceil(cfg.t_max / cfg.step - 1e-9))
        h = cfg.t_max / n_steps
        times, states = [0.0], [y.copy()]
        for k in range(1, n_steps + 1):
            y = _step(f, y, h, cfg.method)
            if check is not None:
                check(y)
            if k % cfg.sample_stride == 0 or k == n_steps:
                times.append(k * h)
                states.append(y.copy())
        return np.asarray(times), np.asarray(states)

    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(np.diff(t_eval) < 0) or (t_eval.size and t_eval[0] < 0):
        raise ValueError("t_eval must be sorted and nonnegative")
    states = np.empty((t_eval.size,) + y.shape)
    t = 0.0
    for i, target in enumerate(t_eval):
        gap = target - t
        if gap > 0:
            n_sub = int(math.ceil(gap / cfg.step - 1e-9))
            h = gap / n_sub
            for _ in range(n_sub):
                y = _step(f, y, h, cfg.method)
                if check is not None:
                    check(y)
            t = target
        states[i] = y
    return t_eval.copy(), states


def _stability_guard(rate: float, cfg: IntegratorConfig) -> None:
    if rate > 0 and cfg.step > 0.1 / rate:
        raise UnstableStep(f"step {cfg.step!r} exceeds 0.1/rate = {0.1 / rate!r}")


def default_config(mode: ModeParams, **kwargs) -> IntegratorConfig:
    rate = effective_rate(mode)
    return IntegratorConfig.for_rate(rate if rate > 0 else 1.0, **kwargs)


def integrate_scalar(mode: ModeParams, cfg: Optional[IntegratorConfig] = None,
                     t_eval: Optional[Sequence[float]] = None) -> Trajectory:
    """Integrate dz/dt = sqrt(gamma^2 + 4 eta^2 z^2) (sigma - lambda z)."""
    cfg = cfg or default_config(mode)
    _stability_guard(effective_rate(mode), cfg)
    g2, e2, lam, sig = mode.gamma ** 2, mode.eta ** 2, mode.lam, mode.sigma

    def f(y):
        return np.sqrt(g2 + 4.0 * e2 * y * y) * (sig - lam * y)

    check = None
    if lam > 0:
        zstar = sig / lam
        start_side = np.sign(zstar - mode.z0)

        def check(y):
            if start_side != 0 and (y[0] - zstar) * start_side > 1e-6:
                raise UnstableStep(f"trajectory overshot sigma/lambda: z={y[0]!r}")

    times, states = solve(f, [mode.z0], cfg, t_eval, check)
    return Trajectory(times, states[:, 0])


def integrate_ab(a0: float, b0: float, lam: float, sigma: float, eta_a: float, eta_b: float,
                 cfg: IntegratorConfig, t_eval: Optional[Sequence[float]] = None) -> ABTrajectory:
    """Integrate the coupled layer projections da/dt = eta_a b (sigma - lambda a b), db/dt = eta_b a (...)."""
    gamma = conserved_gamma(a0, b0, eta_a, eta_b)
    rate = math.sqrt(gamma ** 2 * lam ** 2 + 4 * eta_a * eta_b * sigma ** 2)
    _stability_guard(rate, cfg)

    def f(y):
        a, b = y
        resid = sigma - lam * a * b
        return np.array([eta_a * b * resid, eta_b * a * resid])

    def check(y):
        if not np.all(np.isfinite(y)):
            raise UnstableStep("non-finite state in (a, b) integration")

    times, states = solve(f, [a0, b0], cfg, t_eval, check)
    return ABTrajectory(times, states[:, 0], states[:, 1])


def _covariances(dataset) -> tuple[np.ndarray, np.ndarray]:
    X, Y = np.asarray(dataset.X), np.asarray(dataset.Y)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0] or X.shape[0] < 1:
        raise DimensionError(f"X {X.shape} and Y {Y.shape} must share a positive row count")
    n = X.shape[0]
    return X.T @ X / n, Y.T @ X / n


def _check_init(init, d_x: int, d_y: int) -> tuple[np.ndarray, np.ndarray]:
    W1, W2 = (np.asarray(w, dtype=float) for w in init)
    if W1.ndim != 2 or W2.ndim != 2 or W1.shape[1] != d_x or W2.shape[0] != d_y or W2.shape[1] != W1.shape[0]:
        raise DimensionError(f"W1 {W1.shape} and W2 {W2.shape} do not fit d_x={d_x}, d_y={d_y}")
    return W1, W2


def integrate_full_network(dataset, init, eta_a: float, eta_b: float, cfg: IntegratorConfig,
                           t_eval: Optional[Sequence[float]] = None) -> MatrixTrajectory:
    """Gradient flow of the two-layer linear network on the dataset's empirical covariances."""
    Sxx, Syx = _covariances(dataset)
    d_y, d_x = Syx.shape
    W1, W2 = _check_init(init, d_x, d_y)
    h = W1.shape[0]
    n1 = W1.size

    def f(y):
        A = y[:n1].reshape(h, d_x)
        B = y[n1:].reshape(d_y, h)
        G = Syx - B @ A @ Sxx
        return np.concatenate([(eta_a * B.T @ G).ravel(), (eta_b * G @ A.T).ravel()])

    def check(y):
        if not np.all(np.isfinite(y)):
            raise UnstableStep("non-finite weights in full-network integration")

    times, states = solve(f, np.concatenate([W1.ravel(), W2.ravel()]), cfg, t_eval, check)
    W1s = states[:, :n1].reshape(-1, h, d_x)
    W2s = states[:, n1:].reshape(-1, d_y, h)
    return MatrixTrajectory(times, W1s, W2s, W2s @ W1s)


def training_loss(dataset, W: np.ndarray) -> float:
    X, Y = np.asarray(dataset.X), np.asarray(dataset.Y)
    R = Y - X @ W.T
    return 0.5 * float(np.sum(R * R)) / X.shape[0]


def train_gradient_descent(dataset, init, lr_a: float, lr_b: float, epochs: int) -> MatrixTrajectory:
    """Full-batch gradient descent on the mean squared error; one record per epoch."""
    if epochs < 0 or int(epochs) != epochs:
        raise ValueError("epochs must be a nonnegative integer")
    Sxx, Syx = _covariances(dataset)
    d_y, d_x = Syx.shape
    W1, W2 = _check_init(init, d_x, d_y)
    W1s, W2s, losses = [W1.copy()], [W2.copy()], [training_loss(dataset, W2 @ W1)]
    for epoch in range(1, epochs + 1):
        G = Syx - W2 @ W1 @ Sxx
        W1, W2 = W1 + lr_a * W2.T @ G, W2 + lr_b * G @ W1.T
        loss = training_loss(dataset, W2 @ W1)
        if not math.isfinite(loss) or loss > 1e12:
            raise Diverged(f"training loss {loss!r} at epoch {epoch}")
        if epoch <= 10 and loss > losses[-1] * (1 + 1e-12):
            warnings.warn(f"training loss increased at epoch {epoch}; learning rates may be too large",
                          RuntimeWarning, stacklevel=2)
        W1s.append(W1.copy())
        W2s.append(W2.copy())
        losses.append(loss)
    W1a, W2a = np.asarray(W1s), np.asarray(W2s)
    return MatrixTrajectory(np.arange(epochs + 1, dtype=float), W1a, W2a, W2a @ W1a, np.asarray(losses))
