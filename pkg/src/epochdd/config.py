"""Experiment configuration: JSON in, canonical JSON out.

Canonical form is ``json.dumps(..., indent=2, sort_keys=True)`` plus a
trailing newline, so ``emit(parse(text))`` is a fixed point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from .errors import ConditionViolation, ConfigError, EpochDDError
from .spectral import ModeParams

SWEEP_PARAMETERS = ("lambda_i", "sigma_i", "gamma", "eta", "rho_i", "z0")
SPACINGS = ("log", "linear")

_MODE_KEYS = {"lambda", "sigma", "eta_a", "eta_b", "eta", "gamma", "z0", "rho", "multiplicity"}


@dataclass(frozen=True)
class TimeGridSpec:
    lo: Optional[float] = None
    hi: Optional[float] = None
    count: int = 512
    spacing: str = "log"

    def __post_init__(self):
        if self.spacing not in SPACINGS:
            raise ConfigError(f"spacing must be one of {SPACINGS}, got {self.spacing!r}")
        if self.count < 2:
            raise ConfigError("time grid needs at least 2 points")
        if (self.lo is None) != (self.hi is None):
            raise ConfigError("give both lo and hi, or neither")
        if self.lo is not None and not 0 <= self.lo < self.hi:
            raise ConfigError("need 0 <= lo < hi")
        if self.spacing == "log" and self.lo is not None and self.lo <= 0:
            raise ConfigError("log spacing needs lo > 0")

    def explicit(self) -> Optional[np.ndarray]:
        if self.lo is None:
            return None
        if self.spacing == "log":
            return np.logspace(np.log10(self.lo), np.log10(self.hi), self.count)
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple[float, ...]
    mode_index: int = 0

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"unknown sweep parameter {self.parameter!r}; choose from {SWEEP_PARAMETERS}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")


@dataclass(frozen=True)
class ExperimentConfig:
    modes: tuple[ModeParams, ...]
    t_grid: TimeGridSpec = field(default_factory=TimeGridSpec)
    sweep: Optional[SweepSpec] = None
    prominence: float = 0.01
    output_dir: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if not self.modes:
            raise ConfigError("config needs at least one mode")
        if self.sweep is not None and self.sweep.parameter.endswith("_i") \
                and not 0 <= self.sweep.mode_index < len(self.modes):
            raise ConfigError(f"sweep mode_index {self.sweep.mode_index} out of range")
        if not self.prominence > 0:
            raise ConfigError("prominence must be positive")

    def points(self) -> list[tuple[Optional[float], list[ModeParams]]]:
        """(sweep value, modes) for every point; a single (None, modes) without a sweep."""
        if self.sweep is None:
            return [(None, list(self.modes))]
        return [(v, apply_sweep(list(self.modes), self.sweep.parameter, v, self.sweep.mode_index))
                for v in self.sweep.values]


def apply_sweep(modes: list[ModeParams], parameter: str, value: float, mode_index: int = 0) -> list[ModeParams]:
    """Set one swept parameter; ``*_i`` names touch one mode, the rest touch all modes."""
    value = float(value)
    modes = list(modes)
    if parameter == "lambda_i":
        modes[mode_index] = replace(modes[mode_index], lam=value)
    elif parameter == "sigma_i":
        modes[mode_index] = replace(modes[mode_index], sigma=value)
    elif parameter == "rho_i":
        if not 0.0 <= value <= 1.0:
            raise ConditionViolation("ii", f"swept rho={value!r} outside [0, 1]")
        modes[mode_index] = replace(modes[mode_index], rho=value)
    elif parameter == "gamma":
        modes = [replace(m, gamma=value) for m in modes]
    elif parameter == "eta":
        modes = [replace(m, eta_a=value, eta_b=value) for m in modes]
    elif parameter == "z0":
        modes = [replace(m, z0=value) for m in modes]
    else:
        raise ConfigError(f"unknown sweep parameter {parameter!r}")
    return modes


# ------------------------------------------------------------------ (de)serialisation

def mode_to_dict(m: ModeParams) -> dict:
    return {"lambda": m.lam, "sigma": m.sigma, "eta_a": m.eta_a, "eta_b": m.eta_b,
            "gamma": m.gamma, "z0": m.z0, "rho": m.rho, "multiplicity": m.multiplicity}


def mode_from_dict(d: dict) -> ModeParams:
    if not isinstance(d, dict):
        raise ConfigError(f"mode entry must be an object, got {type(d).__name__}")
    unknown = set(d) - _MODE_KEYS
    if unknown:
        raise ConfigError(f"unknown mode keys {sorted(unknown)}")
    if "eta" in d and ("eta_a" in d or "eta_b" in d):
        raise ConfigError("give either eta or eta_a/eta_b, not both")
    rho = d.get("rho")
    if isinstance(rho, (int, float)) and not 0.0 <= rho <= 1.0:
        raise ConditionViolation("ii", f"rho={rho!r} outside [0, 1]")
    try:
        eta_a = d.get("eta_a", d.get("eta"))
        eta_b = d.get("eta_b", d.get("eta"))
        return ModeParams(float(d["lambda"]), float(d["sigma"]), float(eta_a), float(eta_b),
                          float(d["gamma"]), float(d["z0"]), float(d["rho"]), int(d.get("multiplicity", 1)))
    except KeyError as exc:
        raise ConfigError(f"mode is missing {exc}") from None
    except (TypeError, ValueError, EpochDDError) as exc:
        raise ConfigError(f"bad mode {d}: {exc}") from None


def to_dict(cfg: ExperimentConfig) -> dict:
    g = cfg.t_grid
    return {
        "modes": [mode_to_dict(m) for m in cfg.modes],
        "t_grid": {"lo": g.lo, "hi": g.hi, "count": g.count, "spacing": g.spacing},
        "sweep": None if cfg.sweep is None else {
            "parameter": cfg.sweep.parameter, "values": list(cfg.sweep.values),
            "mode_index": cfg.sweep.mode_index},
        "prominence": cfg.prominence,
        "output_dir": cfg.output_dir,
        "seed": cfg.seed,
    }


def _expect(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def from_dict(d: Any) -> ExperimentConfig:
    _expect(d, {"modes", "t_grid", "sweep", "prominence", "output_dir", "seed"}, "config")
    if "modes" not in d or not isinstance(d["modes"], list):
        raise ConfigError("config needs a list of modes")
    grid = d.get("t_grid") or {}
    _expect(grid, {"lo", "hi", "count", "spacing"}, "t_grid")
    sweep = d.get("sweep")
    try:
        t_grid = TimeGridSpec(
            None if grid.get("lo") is None else float(grid["lo"]),
            None if grid.get("hi") is None else float(grid["hi"]),
            int(grid.get("count", 512)), str(grid.get("spacing", "log")))
        sweep_spec = None
        if sweep is not None:
            _expect(sweep, {"parameter", "values", "mode_index"}, "sweep")
            sweep_spec = SweepSpec(str(sweep["parameter"]), tuple(float(v) for v in sweep["values"]),
                                   int(sweep.get("mode_index", 0)))
        return ExperimentConfig(
            modes=tuple(mode_from_dict(m) for m in d["modes"]),
            t_grid=t_grid, sweep=sweep_spec,
            prominence=float(d.get("prominence", 0.01)),
            output_dir=d.get("output_dir"),
            seed=int(d.get("seed", 0)),
        )
    except (ConfigError, ConditionViolation):
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from None


def emit(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def parse(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return from_dict(data)


def load(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
