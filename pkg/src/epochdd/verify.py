"""Invariant suites run by ``epochdd verify`` and reused by the acceptance tests.

Each suite returns a SuiteResult; ``run`` collects them into a JSON-ready report.
Sizes for the ``full`` level match the acceptance criteria; ``fast`` trims them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analysis import (Scenario, Side, detect_double_descent, inflections,
                       necessary_condition_general, necessary_condition_two_modes,
                       one_layer_zero_init_condition)
from .closed_form import time_to_minimum, z_balanced, z_general, z_one_layer
from .datagen import InitSpec, make_rng, spectral_init, synaptic, synthesize_exact
from .deep import (DeepModeParams, deep_error_second_derivative, deep_inflections,
                   grouped_init, integrate_deep_layerwise, integrate_deep_scalar)
from .experiments import FIGURE_RANGE, FIGURE_POINTS, SCENARIOS, figure_point, sweep_onset
from .generalisation import (CurveShape, analytic_expected_error, classify_mode_curve,
                             constant_error_term, default_time_grid, empirical_shape,
                             monte_carlo_error, total_error)
from .numerics import IntegratorConfig, integrate_ab, integrate_full_network, integrate_scalar
from .oracles import (grid_inflections, match_inflections, oracle_horizon, random_configuration,
                      random_mode, random_modes, rk4_reference, second_difference_sign_changes,
                      tail_slope)
from .spectral import ModeParams, conserved_gamma, effective_rate

LEVELS = ("fast", "full")


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail,
                "seconds": round(self.seconds, 3), "metrics": self.metrics}


def _timed(fn: Callable[..., SuiteResult], *args, **kw) -> SuiteResult:
    t0 = time.perf_counter()
    try:
        res = fn(*args, **kw)
    except Exception as exc:  # a crash is a failure of that suite, not of the runner
        res = SuiteResult(fn.__name__, False, f"raised {type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - t0
    return res


# ------------------------------------------------------------------ suites

def closed_form_oracle(count: int = 50, seed: int = 1, tol: float = 1e-6) -> SuiteResult:
    worst = 0.0
    for m in random_modes(seed, count):
        r = effective_rate(m)
        t = np.concatenate([[0.0], np.logspace(math.log10(1e-4 / r), math.log10(12.0 / r), 511)])
        worst = max(worst, float(np.max(np.abs(z_general(m, t) - rk4_reference(m, t)))))
    return SuiteResult("closed_form_oracle", worst <= tol, f"max |closed form - RK4| = {worst:.3e}",
                       metrics={"max_error": worst, "modes": count})


def conservation(count: int = 20, seed: int = 2, tol: float = 1e-8, inject_fault: bool = False) -> SuiteResult:
    """Imbalance stays put along the (a, b) flow.  ``inject_fault`` kicks a halfway through."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(count):
        a0, b0 = rng.uniform(-1.0, 1.0, 2)
        eta_a, eta_b = np.exp(rng.uniform(math.log(1e-2), math.log(1.0), 2))
        lam, sig = np.exp(rng.uniform(math.log(0.2), math.log(5.0), 2))
        g0 = conserved_gamma(a0, b0, eta_a, eta_b)
        rate = math.sqrt(g0 ** 2 * lam ** 2 + 4 * eta_a * eta_b * sig ** 2)
        cfg = IntegratorConfig.for_rate(rate)
        if inject_fault:
            half = IntegratorConfig(cfg.step, 0.5 * cfg.t_max)
            first = integrate_ab(a0, b0, lam, sig, eta_a, eta_b, half)
            second = integrate_ab(first.a[-1] * 1.001, first.b[-1], lam, sig, eta_a, eta_b, half)
            a, b = np.concatenate([first.a, second.a]), np.concatenate([first.b, second.b])
        else:
            tr = integrate_ab(a0, b0, lam, sig, eta_a, eta_b, cfg)
            a, b = tr.a, tr.b
        worst = max(worst, float(np.max(np.abs(eta_b * a * a - eta_a * b * b - g0))))
    return SuiteResult("conservation", worst <= tol, f"max |imbalance drift| = {worst:.3e}",
                       metrics={"max_drift": worst, "fault_injected": inject_fault})


def _decoupling_setup(seed: int):
    lam = np.array([2.0, 1.0, 0.6, 0.3, 0.8, 0.5])
    sig = np.array([1.5, 2.0, 0.9, 0.4])
    rho = np.array([0.3, 0.0, 0.6, 0.5])
    ds = synthesize_exact(64, 6, 4, lam, sig, rho, seed)
    a0, b0 = np.array([0.1, 0.2, 0.05, 0.3]), np.array([0.15, 0.05, 0.2, 0.1])
    eta_a, eta_b = 0.8, 0.5
    modes = [ModeParams.from_ab(a0[i], b0[i], lam[i], sig[i], eta_a, eta_b, rho[i]) for i in range(4)]
    init = spectral_init(ds, InitSpec.standard(4, a0, b0))
    return ds, modes, init, eta_a, eta_b


def decoupling(seed: int = 3, off_tol: float = 1e-8, diag_tol: float = 1e-5) -> SuiteResult:
    ds, modes, init, eta_a, eta_b = _decoupling_setup(seed)
    rates = [effective_rate(m) for m in modes]
    cfg = IntegratorConfig(0.01 / max(rates), 12.0 / min(rates), sample_stride=10)
    traj = integrate_full_network(ds, init, eta_a, eta_b, cfg)
    Z = synaptic(ds, traj.W)
    idx = np.arange(4)
    diag = Z[:, idx, idx]
    off = Z.copy()
    off[:, idx, idx] = 0.0
    off_ratio = float(np.max(np.abs(off)) / np.max(np.abs(diag)))
    diag_err = max(float(np.max(np.abs(diag[:, i] - z_general(m, traj.times)))) for i, m in enumerate(modes))
    ok = off_ratio <= off_tol and diag_err <= diag_tol
    return SuiteResult("decoupling", ok, f"off-diagonal/diagonal = {off_ratio:.3e}, diagonal error = {diag_err:.3e}",
                       metrics={"off_ratio": off_ratio, "diag_error": diag_err})


def decomposition(seed: int = 4, n_test: int = 100_000, checkpoints: int = 10, k_se: float = 3.0) -> SuiteResult:
    """Per-mode error sum against a Monte-Carlo estimate at points along the full-network flow."""
    ds, modes, init, eta_a, eta_b = _decoupling_setup(seed)
    rates = [effective_rate(m) for m in modes]
    t_eval = np.concatenate([[0.0], np.logspace(math.log10(0.1 / max(rates)), math.log10(12.0 / min(rates)),
                                                checkpoints - 1)])
    cfg = IntegratorConfig(0.01 / max(rates), float(t_eval[-1]))
    traj = integrate_full_network(ds, init, eta_a, eta_b, cfg, t_eval=t_eval)
    curve = total_error(modes, t_eval, constant_error_term(ds))
    worst_z, worst_exact = 0.0, 0.0
    for k, W in enumerate(traj.W):
        mean, se = monte_carlo_error(ds, W, n_test, seed=1000 * seed + k)
        worst_z = max(worst_z, abs(curve.values[k] - mean) / se)
        worst_exact = max(worst_exact, abs(curve.values[k] - analytic_expected_error(ds, W)))
    ok = worst_z <= k_se and worst_exact <= 1e-8
    return SuiteResult("decomposition", ok,
                       f"max |analytic - MC| = {worst_z:.2f} standard errors; "
                       f"max |sum - exact expectation| = {worst_exact:.2e}",
                       metrics={"max_z_score": worst_z, "max_exact_gap": worst_exact})


def census(count: int = 500, seed: int = 5) -> SuiteResult:
    """Inflection counts, the three-root split, and agreement with a dense second-difference grid."""
    dist = {0: 0, 1: 0, 2: 0, 3: 0}
    bad_count, bad_split, mismatches = [], [], []
    for k, m in enumerate(random_modes(seed, count)):
        rep = inflections(m, k)
        n_before = len(rep.times(Side.BEFORE_MIN))
        dist[len(rep.points)] = dist.get(len(rep.points), 0) + 1
        if len(rep.points) > 3 or n_before > 2:
            bad_count.append(k)
        if len(rep.points) == 3 and 0 < m.rho < 5 / 7 and n_before != 2:
            bad_split.append(k)
        t_end = oracle_horizon(m, [p.z_hat for p in rep.points])
        t, sc = grid_inflections(m, t_end)
        ok, why = match_inflections(rep.times(), sc, t[1] - t[0], t_end)
        if not ok:
            mismatches.append((k, why))
    ok = not (bad_count or bad_split or mismatches)
    return SuiteResult("inflection_census", ok,
                       f"counts {dist}; count violations {bad_count}; split violations {bad_split}; "
                       f"oracle mismatches {mismatches[:3]}",
                       metrics={"distribution": {str(k): v for k, v in dist.items()},
                                "mismatches": len(mismatches)})


def soundness(count: int = 1000, seed: int = 6, prominence: float = 0.01) -> SuiteResult:
    rng = make_rng(seed)
    detections, violations = 0, []
    for k in range(count):
        modes = random_configuration(rng)
        v = detect_double_descent(total_error(modes, default_time_grid(modes)), prominence, modes)
        if v.detected:
            detections += 1
            if not v.necessary_condition_holds:
                violations.append(k)
    return SuiteResult("detector_soundness", not violations,
                       f"{detections} detections in {count} configurations, {len(violations)} violations",
                       metrics={"detections": detections, "violations": violations})


def figure_orderings() -> SuiteResult:
    values = np.logspace(math.log10(FIGURE_RANGE[0]), math.log10(FIGURE_RANGE[1]), FIGURE_POINTS)
    detected = {(row, sc): [figure_point(row, sc, v).verdict.detected for v in values]
                for row in ("lambda_i", "sigma_i") for sc in SCENARIOS}
    top = all(detected[("lambda_i", sc)][-1] for sc in SCENARIOS)
    bottom = (detected[("sigma_i", "bridged")][-1] and detected[("sigma_i", "balanced")][-1]
              and not any(detected[("sigma_i", "one_layer")]))
    on_large = sweep_onset("one_layer", "lambda_i", *FIGURE_RANGE)
    on_small = sweep_onset("bridged", "lambda_i", *FIGURE_RANGE)
    order = on_large is not None and on_small is not None and on_large <= on_small
    ok = top and bottom and order
    return SuiteResult("figure_orderings", ok,
                       f"top row detects at large lambda: {top}; bottom row only for eta > 0: {bottom}; "
                       f"onset gamma=0.005 {on_large} <= onset gamma=0.0025 {on_small}: {order}",
                       metrics={"onset_one_layer": on_large, "onset_bridged": on_small})


def one_layer_asymmetry(pairs: int = 200, zero_init_pairs: int = 100, seed: int = 8) -> SuiteResult:
    rng = make_rng(seed)
    first_hits = []
    for k in range(pairs):
        mi, mj = random_mode(rng, "one_layer"), random_mode(rng, "one_layer")
        _, scen = necessary_condition_two_modes(mi, mj)
        if scen in (Scenario.FIRST, Scenario.BOTH):
            first_hits.append(k)
    disagreements = []
    for k in range(zero_init_pairs):
        gamma = random_mode(rng, "one_layer").gamma
        mi, mj = (random_mode(rng, "one_layer").with_(z0=0.0, gamma=gamma) for _ in range(2))
        if time_to_minimum(mi) > time_to_minimum(mj):
            mi, mj = mj, mi
        if time_to_minimum(mi) == time_to_minimum(mj):
            continue
        if one_layer_zero_init_condition(mi, mj) != necessary_condition_two_modes(mi, mj)[0]:
            disagreements.append(k)
    ok = not first_hits and not disagreements
    return SuiteResult("one_layer_asymmetry", ok,
                       f"first scenario held in {len(first_hits)} of {pairs} pairs; "
                       f"zero-init condition disagreed in {len(disagreements)} of {zero_init_pairs}",
                       metrics={"first_hits": first_hits, "disagreements": disagreements})


def convergence_rate(count: int = 30, seed: int = 1, rtol: float = 0.05) -> SuiteResult:
    """Uses the first modes of the closed-form oracle population."""
    worst = 0.0
    for m in random_modes(seed, 50)[:count]:
        r = effective_rate(m)
        worst = max(worst, abs(tail_slope(m) + r) / r)
    return SuiteResult("convergence_rate", worst <= rtol, f"max relative slope error = {worst:.3f}",
                       metrics={"max_rel_error": worst})


def deep_base() -> ModeParams:
    return ModeParams.from_eta(1.0, 2.5, 0.005, 0.0, 0.01, 0.5)


def deep_trend(depths=(8, 16, 32)) -> SuiteResult:
    """Layerwise product against the approximate scalar flow at matched grouped parameters."""
    base = deep_base()
    gaps = []
    for L in depths:
        md = DeepModeParams(base, L)
        sc = integrate_deep_scalar(md)
        a0 = grouped_init(L, base.z0, base.gamma, base.eta_a, base.eta_b)
        cfg = IntegratorConfig(0.01 / md.stiffness(), 3.0 * float(sc.times[-1]))
        lw = integrate_deep_layerwise(L, a0, base.eta_a, base.eta_b, base.lam, base.sigma, cfg)
        zs = np.array([sc.z_at(t) if t <= sc.times[-1] else sc.values[-1] for t in lw.times])
        gaps.append(float(np.max(np.abs(lw.z - zs))))
    ok = all(b < a for a, b in zip(gaps, gaps[1:]))
    return SuiteResult("deep_trend", ok, f"sup gaps over depths {list(depths)}: {[f'{g:.4f}' for g in gaps]}",
                       metrics={"gaps": gaps})


def deep_inflection_oracle(L: int = 8) -> SuiteResult:
    """Deep inflection times against second differences of the integrated curve."""
    md = DeepModeParams(deep_base(), L)
    tr = integrate_deep_scalar(md)
    rep = deep_inflections(md, tr)
    b = md.base
    err = ((1 - b.rho) * b.sigma - b.lam * tr.values) ** 2
    sc = second_difference_sign_changes(tr.times, err)
    ok_grid, why = match_inflections(rep.times(), sc, tr.step, float(tr.times[-1]))
    z_err = max(abs(tr.z_at(p.t_hat) - p.z_hat) for p in rep.points)
    flips = all(np.prod(deep_error_second_derivative(md, [p.z_hat * (1 - 1e-6), p.z_hat * (1 + 1e-6)])) < 0
                for p in rep.points)
    ok = ok_grid and z_err <= 1e-9 and flips and len(rep.points) == 2
    return SuiteResult("deep_inflections", ok,
                       f"z at inflection times off by {z_err:.1e}; grid check: {why}; sign flips: {flips}",
                       metrics={"z_hat": [p.z_hat for p in rep.points], "z_error": z_err})


def shape_law(count: int = 200, seed: int = 11) -> SuiteResult:
    bad = []
    for k, m in enumerate(random_modes(seed, count)):
        t = np.linspace(0.0, oracle_horizon(m), 4001)
        shape = classify_mode_curve(m)
        got = empirical_shape(total_error([m], t).values)
        if got is not shape and not (shape is CurveShape.U_SHAPED and m.rho < 1e-9):
            bad.append(k)
    return SuiteResult("shape_law", not bad, f"{len(bad)} of {count} curves disagree with the predicted shape",
                       metrics={"mismatches": bad})


def special_cases(count: int = 50, seed: int = 12, tol: float = 1e-9) -> SuiteResult:
    """Special-case formulas against the general one just off the special manifold."""
    rng = make_rng(seed)
    worst = 0.0
    for _ in range(count):
        m = random_mode(rng, "one_layer")
        near = m.with_(eta_a=1e-9, eta_b=1e-9)
        t = np.linspace(0, 5 / effective_rate(m), 50)
        worst = max(worst, float(np.max(np.abs(z_one_layer(m, t) - z_general(near, t)))))
        m = random_mode(rng, "balanced")
        near = m.with_(gamma=1e-9)
        t = np.linspace(0, 5 / effective_rate(m), 50)
        worst = max(worst, float(np.max(np.abs(z_balanced(m, t) - z_general(near, t)))))
    return SuiteResult("special_case_consistency", worst <= tol, f"max gap = {worst:.2e}",
                       metrics={"max_gap": worst})


def rk4_order(seed: int = 13) -> SuiteResult:
    """Halving the step should cut the error by about 2^4."""
    m = random_modes(seed, 1, "general")[0]
    r = effective_rate(m)
    t_end = 4.0 / r
    errs = []
    for spu in (10.0, 20.0, 40.0):
        tr = integrate_scalar(m, IntegratorConfig(1.0 / (spu * r), t_end), t_eval=[t_end])
        errs.append(abs(float(tr.values[-1]) - float(z_general(m, t_end))))
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = all(3.5 < p < 4.5 for p in orders)
    return SuiteResult("rk4_order", ok, f"observed orders {[f'{p:.2f}' for p in orders]}",
                       metrics={"orders": orders})


# ------------------------------------------------------------------ runner

def suites(level: str, inject_fault: bool = False) -> list[tuple[Callable, dict]]:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    full = level == "full"
    return [
        (closed_form_oracle, {"count": 50 if full else 10}),
        (conservation, {"inject_fault": inject_fault}),
        (decoupling, {}),
        (decomposition, {"n_test": 100_000 if full else 20_000}),
        (census, {"count": 500 if full else 100}),
        (soundness, {"count": 1000 if full else 100}),
        (figure_orderings, {}),
        (one_layer_asymmetry, {} if full else {"pairs": 50, "zero_init_pairs": 30}),
        (convergence_rate, {}),
        (deep_trend, {} if full else {"depths": (4, 8)}),
        (deep_inflection_oracle, {}),
        (shape_law, {"count": 200 if full else 50}),
        (special_cases, {}),
        (rk4_order, {}),
    ]


def run(level: str = "fast", inject_fault: bool = False, progress: Callable[[SuiteResult], None] = None) -> dict:
    results = []
    for fn, kw in suites(level, inject_fault):
        res = _timed(fn, **kw)
        results.append(res)
        if progress:
            progress(res)
    return {"level": level, "passed": bool(all(r.passed for r in results)),
            "failed": [r.name for r in results if not r.passed],
            "suites": [r.to_dict() for r in results]}
