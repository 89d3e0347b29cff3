import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from epochdd.analysis import (DDVerdict, InflectionReport, Scenario, Side, balanced_inflection_weights,
                              cubic_coefficients, cubic_discriminant, detect_double_descent,
                              error_second_derivative, inflection_balanced, inflection_general,
                              inflection_one_layer, inflections, necessary_condition_general,
                              necessary_condition_two_modes, one_layer_zero_init_condition,
                              routh_sign_changes, solve_cubic)
from epochdd.closed_form import time_to_target
from epochdd.errors import RegimeError, TooFewSamples
from epochdd.generalisation import ErrorCurve, default_time_grid, total_error
from epochdd.oracles import (grid_inflections, match_inflections, oracle_horizon, random_mode,
                             random_modes)
from epochdd.spectral import ModeParams


def _grid_check(mode, rep):
    t_end = oracle_horizon(mode, [p.z_hat for p in rep.points])
    t, sc = grid_inflections(mode, t_end)
    return match_inflections(rep.times(), sc, t[1] - t[0], t_end)


# ---------------------------------------------------------------- second derivative

def test_second_derivative_symbolic():
    z, lam, sig, rho, g, e = sp.symbols("z lam sig rho g e", positive=True)
    zdot = sp.sqrt(g ** 2 + 4 * e ** 2 * z ** 2) * (sig - lam * z)
    err = ((1 - rho) * sig - lam * z) ** 2
    first = sp.diff(err, z) * zdot
    second = sp.diff(first, z) * zdot
    fn = sp.lambdify((z, lam, sig, rho, g, e), second, "numpy")
    for m in random_modes(41, 10, "general"):
        zz = np.linspace(m.z0, 0.95 * m.sigma / m.lam, 9)
        ours = error_second_derivative(m, zz)
        ref = fn(zz, m.lam, m.sigma, m.rho, m.gamma, m.eta)
        assert np.allclose(ours, ref, rtol=1e-9, atol=1e-14 * np.max(np.abs(ref)))


def test_cubic_coefficients_divide_second_derivative():
    z, lam, sig, rho, g, e = sp.symbols("z lam sig rho g e", positive=True)
    zbar = (1 - rho) * sig / lam
    inner = (g ** 2 + 4 * e ** 2 * z ** 2) * (sig + lam * zbar - 2 * lam * z) \
        - 4 * e ** 2 * z * (zbar - z) * (sig - lam * z)
    a, b, c, d = (12 * lam ** 2 * e ** 2, -8 * e ** 2 * lam * sig * (2 - rho),
                  2 * (g ** 2 * lam ** 2 + 2 * e ** 2 * sig ** 2 * (1 - rho)), -g ** 2 * lam * sig * (2 - rho))
    assert sp.simplify(sp.expand(-lam * inner) - sp.expand(a * z ** 3 + b * z ** 2 + c * z + d)) == 0


# ---------------------------------------------------------------- cubic utilities

@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(0.1, 3))
def test_solve_cubic_three_real_roots(roots, a):
    roots = sorted(roots)
    if min(np.diff(roots)) < 1e-3:
        return
    coeffs = a * np.poly(roots)
    assert np.allclose(solve_cubic(*coeffs), roots, atol=1e-8)


def test_solve_cubic_one_real_root():
    # (x - 2)(x^2 + 1)
    assert solve_cubic(1.0, -2.0, 1.0, -2.0) == pytest.approx([2.0])
    assert solve_cubic(0.0, 1.0, -3.0, 2.0) == pytest.approx([1.0, 2.0])


def test_discriminant_sign_matches_root_count():
    for m in random_modes(42, 300, "general"):
        coeffs = cubic_coefficients(m)
        r = np.roots(coeffs)
        n_real = int(np.sum(np.abs(r.imag) < 1e-9 * np.max(np.abs(r))))
        disc = cubic_discriminant(m)
        if abs(disc) < 1e-9 * max(abs(c) for c in coeffs) ** 4:
            continue
        assert (disc > 0) == (n_real == 3)


def test_discriminant_homogeneity():
    # each coefficient is quadratic in (gamma, eta) and the discriminant is quartic in them
    for m in random_modes(43, 5, "general"):
        c = 1.7
        scaled = m.with_(gamma=c * m.gamma, eta_a=c * m.eta_a, eta_b=c * m.eta_b)
        assert cubic_discriminant(scaled) == pytest.approx(c ** 8 * cubic_discriminant(m), rel=1e-10)


def test_balanced_discriminant_sign_from_quadratic():
    m = ModeParams.from_eta(1.0, 2.5, 0.005, 0.0, 0.01, 0.5)
    a, b, c, d = cubic_coefficients(m)
    assert d == 0  # z = 0 factors out; the rest is the balanced quadratic
    assert b * b - 4 * a * c > 0
    z_minus, z_plus = balanced_inflection_weights(m)
    assert np.allclose(sorted(np.roots([a, b, c]).real), [z_minus, z_plus], rtol=1e-12)


def test_routh_three_sign_changes():
    for m in random_modes(44, 300, "general"):
        assert routh_sign_changes(*cubic_coefficients(m)) == 3
        assert np.all(np.roots(cubic_coefficients(m)).real > 0)


# ---------------------------------------------------------------- regimes

def test_one_layer_point(one_layer_mode):
    rep = inflection_one_layer(one_layer_mode)
    assert len(rep.points) == 1
    p = rep.points[0]
    assert p.t_hat == pytest.approx(math.log(3.984) / 0.005, rel=1e-14)
    assert p.side is Side.AFTER_MIN
    assert p.t_hat > time_to_target(one_layer_mode, 0.5)
    assert _grid_check(one_layer_mode, rep)[0]


def test_one_layer_without_noise_has_none(one_layer_mode):
    assert inflection_one_layer(one_layer_mode.with_(rho=0.0)).points == ()


def test_balanced_points_straddle_minimum(balanced_mode):
    rep = inflection_balanced(balanced_mode)
    t_min = time_to_target(balanced_mode, 0.5)
    assert [p.side for p in rep.points] == [Side.BEFORE_MIN, Side.AFTER_MIN]
    assert rep.points[0].t_hat < t_min < rep.points[1].t_hat
    assert _grid_check(balanced_mode, rep)[0]


def test_balanced_late_start_drops_early_point(balanced_mode):
    z_minus, _ = balanced_inflection_weights(balanced_mode)
    rep = inflection_balanced(balanced_mode.with_(z0=z_minus * 1.01))
    assert [p.side for p in rep.points] == [Side.AFTER_MIN]


def test_balanced_zero_noise(balanced_mode):
    rep = inflection_balanced(balanced_mode.with_(rho=0.0))
    assert len(rep.points) <= 1 and all(p.side is Side.BEFORE_MIN for p in rep.points)
    assert rep.points[0].z_hat == pytest.approx(2.5 / 3)


def test_general_bridged_against_grid(bridged_mode):
    rep = inflection_general(bridged_mode)
    ok, why = _grid_check(bridged_mode, rep)
    assert ok, why


def test_negative_discriminant_means_at_most_one_point():
    seen = 0
    for m in random_modes(45, 400, "general"):
        if cubic_discriminant(m) < 0:
            seen += 1
            assert len(inflection_general(m).points) <= 1
    assert seen > 0


def test_regime_errors(one_layer_mode, balanced_mode, bridged_mode):
    with pytest.raises(RegimeError):
        inflection_one_layer(bridged_mode)
    with pytest.raises(RegimeError):
        inflection_balanced(bridged_mode)
    with pytest.raises(RegimeError):
        inflection_general(balanced_mode)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 100_000))
def test_report_invariants(seed):
    m = random_mode(np.random.default_rng(seed))
    rep = inflections(m)
    assert len(rep.points) <= 3
    assert len(rep.times(Side.BEFORE_MIN)) <= 2
    assert rep.times() == sorted(rep.times())
    for p in rep.points:
        assert (p.side is Side.BEFORE_MIN) == (p.t_hat < rep.t_min)


def test_report_rejects_too_many_points():
    from epochdd.analysis import InflectionPoint
    pts = tuple(InflectionPoint(float(k), 0.1, Side.BEFORE_MIN) for k in range(3))
    with pytest.raises(ValueError):
        InflectionReport(0, pts, 10.0, 0.0, 3)


# ---------------------------------------------------------------- necessary conditions

def test_single_mode_never_satisfies(bridged_mode):
    assert necessary_condition_general([bridged_mode]) == (False, None)


def test_all_noise_free_never_satisfies():
    modes = [m.with_(rho=0.0) for m in random_modes(46, 4, "general")]
    assert not necessary_condition_general(modes)[0]


def test_one_layer_pairs_never_first_scenario():
    rng = np.random.default_rng(47)
    for _ in range(100):
        _, scen = necessary_condition_two_modes(random_mode(rng, "one_layer"), random_mode(rng, "one_layer"))
        assert scen in (Scenario.SECOND, Scenario.NEITHER)


def test_balanced_pair_noise_free_first_label(balanced_mode):
    # Read with the labels as given, neither inequality can hold: the noise-free
    # mode has no late inflection and the other starts past its early one.
    zi, _ = balanced_inflection_weights(balanced_mode.with_(rho=0.0))
    zj, _ = balanced_inflection_weights(balanced_mode)
    mi = balanced_mode.with_(rho=0.0, z0=1.01 * zi)
    mj = balanced_mode.with_(z0=1.01 * zj)
    assert inflections(mi).times(Side.AFTER_MIN) == []
    assert inflections(mj).times(Side.BEFORE_MIN) == []
    # Ordered by minimum time, the noise-free mode comes last (its minimum is
    # never reached), and the other mode's late inflection lies in the window.
    assert necessary_condition_two_modes(mi, mj) == (True, Scenario.SECOND)
    assert necessary_condition_general([mi, mj])[0]


def test_zero_init_condition_arithmetic():
    mi = ModeParams.from_eta(10.0, 2.5, 0.0, 0.01, 0.0, 0.5)
    mj = ModeParams.from_eta(1.0, 2.5, 0.0, 0.01, 0.0, 0.8)
    assert math.log(4) <= 10 * math.log(1.25)
    assert one_layer_zero_init_condition(mi, mj)
    assert necessary_condition_two_modes(mi, mj)[0]
    assert not one_layer_zero_init_condition(mi, mj.with_(rho=1.0))


def test_zero_init_condition_regime():
    with pytest.raises(RegimeError):
        one_layer_zero_init_condition(ModeParams.from_eta(1.0, 2.5, 0.1, 0.01, 0.0, 0.5),
                                      ModeParams.from_eta(1.0, 2.5, 0.0, 0.01, 0.0, 0.5))


# ---------------------------------------------------------------- detector

def _curve(values):
    values = np.asarray(values, dtype=float)
    return ErrorCurve(np.arange(values.size, dtype=float), values, 0.0)


def test_detector_monotone():
    assert not detect_double_descent(_curve(np.linspace(1, 0, 300))).detected


def test_detector_synthetic_double_dip():
    x = np.linspace(0, 1, 400)
    v = np.exp(-8 * x) + 0.3 * np.exp(-((x - 0.5) / 0.08) ** 2)
    verdict = detect_double_descent(_curve(v))
    assert verdict.detected
    assert verdict.first_min_t < verdict.peak_t < verdict.second_min_t
    assert verdict.necessary_condition_holds is None


def test_detector_ignores_initial_rise():
    x = np.linspace(0, 1, 400)
    assert not detect_double_descent(_curve(np.sin(np.pi * x))).detected


def test_detector_needs_samples():
    with pytest.raises(TooFewSamples):
        detect_double_descent(_curve(np.ones(100)))


def test_detector_fires_for_balanced_large_singular_value():
    mi = ModeParams.from_eta(1.0, 60.0, 0.005, 0.0, 0.01, 0.5, 1)
    mj = ModeParams.from_eta(1.0, 2.5, 0.005, 0.0, 0.01, 0.8, 9)
    v = detect_double_descent(total_error([mi, mj], default_time_grid([mi, mj])), 1e-4, [mi, mj])
    assert v.detected and v.necessary_condition_holds
    assert necessary_condition_two_modes(mi, mj)[0]


def test_verdict_serialises():
    d = DDVerdict(False, None, None, None, 0.0, True, (1, math.inf)).to_dict()
    assert d["witness"] == {"mode_index": 1, "t_hat": "inf"}
