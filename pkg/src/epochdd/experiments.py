"""Experiment drivers behind the command line: single runs and sweeps,
the two-row double-descent figure, and onset search."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .analysis import MIN_DETECTOR_SAMPLES, DDVerdict, _num, detect_double_descent, inflections
from .closed_form import z_general
from .config import ExperimentConfig, mode_to_dict
from .errors import ConfigError, InactiveMode, RegimeError
from .generalisation import ErrorCurve, default_time_grid, fmt, total_error, write_curve_csv
from .spectral import ModeParams, check_conditions, classify_activity
from .svgplot import Series, line_chart, write_svg

# Figure defaults.  The sweep values are not published; these are our choice.
SCENARIOS = {"one_layer": (0.005, 0.0), "bridged": (0.0025, 0.0025), "balanced": (0.0, 0.005)}
FIGURE_ROWS = ("lambda_i", "sigma_i")
FIGURE_RANGE = (1.0, 100.0)
FIGURE_POINTS = 10
FIGURE_PROMINENCE = 1e-4
BASE = dict(lam=1.0, sigma=2.5, z0=0.01, rho_i=0.5, rho_j=0.8)


@dataclass(frozen=True)
class PointResult:
    value: Optional[float]
    modes: tuple[ModeParams, ...]
    curve: ErrorCurve
    z: np.ndarray  # (n_modes, n_times)
    reports: tuple[Optional[dict], ...]
    verdict: DDVerdict

    def to_dict(self) -> dict:
        return {
            "value": _num(self.value),
            "modes": [mode_to_dict(m) for m in self.modes],
            "inflections": list(self.reports),
            "verdict": self.verdict.to_dict(),
        }


def _mode_z(mode: ModeParams, t: np.ndarray) -> np.ndarray:
    if not classify_activity(mode).active:
        return np.full_like(t, mode.z0)
    return z_general(mode, t)


def _report(mode: ModeParams, index: int) -> Optional[dict]:
    try:
        return inflections(mode, index).to_dict()
    except (InactiveMode, RegimeError):
        return None


def run_point(modes: Sequence[ModeParams], t_grid: Optional[np.ndarray] = None,
              prominence: float = 0.01, value: Optional[float] = None) -> PointResult:
    """Evaluate one configuration: curve, trajectories, per-mode inflections, verdict.

    Raises ConditionViolation before doing any work if a mode is invalid.
    """
    modes = tuple(modes)
    for m in modes:
        check_conditions(m)
    t = default_time_grid(modes) if t_grid is None else np.asarray(t_grid, dtype=float)
    if t.size < MIN_DETECTOR_SAMPLES:
        raise ConfigError(f"time grid has {t.size} points; the detector needs {MIN_DETECTOR_SAMPLES}")
    curve = total_error(modes, t)
    z = np.array([_mode_z(m, t) for m in modes])
    reports = tuple(_report(m, i) for i, m in enumerate(modes))
    verdict = detect_double_descent(curve, prominence, modes)
    return PointResult(value, modes, curve, z, reports, verdict)


def _run_point_args(args):
    return run_point(*args)


def run_config(cfg: ExperimentConfig, jobs: int = 1) -> list[PointResult]:
    tasks = [(modes, cfg.t_grid.explicit(), cfg.prominence, value) for value, modes in cfg.points()]
    for modes, *_ in tasks:  # fail fast, before any worker starts
        for m in modes:
            check_conditions(m)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_point_args, tasks))
    return [run_point(*task) for task in tasks]


def write_trajectories_csv(path: str, t: np.ndarray, z: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *(f"z_{i}" for i in range(len(z)))])
        for k in range(t.size):
            w.writerow([fmt(t[k]), *(fmt(row[k]) for row in z)])


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False, default=_plain)
        fh.write("\n")


def simulate(cfg: ExperimentConfig, out_dir: str, jobs: int = 1) -> dict:
    """Run a config and write curves.csv, trajectories.csv and report.json.

    A sweep puts the two CSVs of each point in ``point_NNN/``; report.json
    always sits at the top and lists every point.
    """
    results = run_config(cfg, jobs)
    os.makedirs(out_dir, exist_ok=True)
    for k, res in enumerate(results):
        where = out_dir if cfg.sweep is None else os.path.join(out_dir, f"point_{k:03d}")
        os.makedirs(where, exist_ok=True)
        write_curve_csv(os.path.join(where, "curves.csv"), res.curve)
        write_trajectories_csv(os.path.join(where, "trajectories.csv"), res.curve.times, res.z)
    report = {
        "seed": cfg.seed,
        "prominence": cfg.prominence,
        "sweep": None if cfg.sweep is None else {"parameter": cfg.sweep.parameter,
                                                 "mode_index": cfg.sweep.mode_index},
        "points": [r.to_dict() for r in results],
    }
    write_json(os.path.join(out_dir, "report.json"), report)
    return report


# ------------------------------------------------------------------ figure

def figure_modes(row: str, scenario: str, value: float) -> list[ModeParams]:
    """Two mode groups; the swept group has multiplicity 9 (lambda row) or 1 (sigma row)."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    gamma, eta = SCENARIOS[scenario]
    lam, sig, z0 = BASE["lam"], BASE["sigma"], BASE["z0"]
    if row == "lambda_i":
        mi = ModeParams.from_eta(value, sig, eta, gamma, z0, BASE["rho_i"], 9)
        mj = ModeParams.from_eta(lam, sig, eta, gamma, z0, BASE["rho_j"], 1)
    elif row == "sigma_i":
        mi = ModeParams.from_eta(lam, value, eta, gamma, z0, BASE["rho_i"], 1)
        mj = ModeParams.from_eta(lam, sig, eta, gamma, z0, BASE["rho_j"], 9)
    else:
        raise ConfigError(f"figure rows sweep lambda_i or sigma_i, not {row!r}")
    return [mi, mj]


def figure_point(row: str, scenario: str, value: float, prominence: float = FIGURE_PROMINENCE) -> PointResult:
    return run_point(figure_modes(row, scenario, value), None, prominence, value)


def sweep_onset(scenario: str, parameter: str, lo: float, hi: float,
                prominence: float = FIGURE_PROMINENCE, coarse: int = FIGURE_POINTS,
                rtol: float = 1e-3) -> Optional[float]:
    """Smallest swept value with a detection, or None.

    A log-spaced scan finds the first detecting value, then bisection in log
    space narrows the bracket below it to ``rtol``.
    """
    if not 0 < lo <= hi:
        raise ConfigError("need 0 < lo <= hi")

    def hit(v):
        return figure_point(parameter, scenario, v, prominence).verdict.detected

    values = [lo] if lo == hi else list(np.logspace(math.log10(lo), math.log10(hi), max(coarse, 2)))
    first = next((k for k, v in enumerate(values) if hit(v)), None)
    if first is None:
        return None
    if first == 0:
        return float(values[0])
    a, b = math.log(values[first - 1]), math.log(values[first])
    while b - a > rtol:
        mid = 0.5 * (a + b)
        if hit(math.exp(mid)):
            b = mid
        else:
            a = mid
    return float(math.exp(b))


def figure1(out_dir: str, seed: int = 0, values: Optional[Sequence[float]] = None,
            prominence: float = FIGURE_PROMINENCE, onsets: bool = True) -> dict:
    """Both sweep rows for the three scenarios: SVG and CSV per panel, verdicts and onsets.

    Everything is analytic, so ``seed`` is recorded but does not change the output.
    """
    values = list(np.logspace(math.log10(FIGURE_RANGE[0]), math.log10(FIGURE_RANGE[1]), FIGURE_POINTS)) \
        if values is None else [float(v) for v in values]
    os.makedirs(out_dir, exist_ok=True)
    verdicts = []
    for row in FIGURE_ROWS:
        for scenario in SCENARIOS:
            name = f"{row}_{scenario}"
            results = [figure_point(row, scenario, v, prominence) for v in values]
            with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["value", "t", "total"])
                for res in results:
                    for t, e in zip(res.curve.times, res.curve.values):
                        w.writerow([fmt(res.value), fmt(t), fmt(e)])
            series = [Series(f"{row[:-2]}={res.value:.3g}", res.curve.times, res.curve.values) for res in results]
            gamma, eta = SCENARIOS[scenario]
            write_svg(os.path.join(out_dir, f"{name}.svg"),
                      line_chart(series, f"{scenario}: gamma={gamma:g}, eta={eta:g}", "t", "error",
                                 logx=True, logy=True))
            for res in results:
                v = res.verdict
                verdicts.append({"row": row, "scenario": scenario, "gamma": gamma, "eta": eta,
                                 "value": res.value, "detected": v.detected,
                                 "prominence": v.prominence,
                                 "necessary_condition_holds": v.necessary_condition_holds})
    with open(os.path.join(out_dir, "verdicts.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "scenario", "gamma", "eta", "value", "detected", "prominence",
                    "necessary_condition_holds"])
        for r in verdicts:
            w.writerow([r["row"], r["scenario"], fmt(r["gamma"]), fmt(r["eta"]), fmt(r["value"]),
                        str(r["detected"]).lower(), fmt(r["prominence"]),
                        str(r["necessary_condition_holds"]).lower()])
    onset_table = {}
    if onsets:
        lo, hi = min(values), max(values)
        onset_table = {row: {sc: sweep_onset(sc, row, lo, hi, prominence) for sc in SCENARIOS}
                       for row in FIGURE_ROWS}
    report = {"seed": seed, "prominence": prominence, "values": values,
              "verdicts": verdicts, "onsets": onset_table}
    write_json(os.path.join(out_dir, "figure1.json"), report)
    return report


def write_onsets_csv(path: str, table: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "scenario", "onset"])
        for row in sorted(table):
            for sc in sorted(table[row]):
                v = table[row][sc]
                w.writerow([row, sc, "absent" if v is None else fmt(v)])
