import csv

import numpy as np
import pytest

from epochdd.analysis import detect_double_descent
from epochdd.closed_form import time_to_target
from epochdd.datagen import synthesize_exact, synthesize_sampled
from epochdd.generalisation import (CurveShape, analytic_expected_error, classify_mode_curve,
                                    constant_error_term, default_time_grid, empirical_shape,
                                    mode_component, mode_error, monte_carlo_error, total_error,
                                    write_curve_csv)
from epochdd.oracles import random_modes
from epochdd.spectral import ModeParams


def test_mode_error_limits(bridged_mode):
    assert mode_error(bridged_mode.with_(rho=0.0), 1e9) == pytest.approx(0.0, abs=1e-20)
    assert mode_error(bridged_mode, 1e9) == pytest.approx((0.5 * 2.5) ** 2, rel=1e-12)
    assert mode_error(bridged_mode, time_to_target(bridged_mode, 0.5)) < 1e-16


def test_component_is_rescaled_mode_error(bridged_mode):
    t = np.linspace(0, 2000, 50)
    assert np.allclose(mode_component(bridged_mode, t), mode_error(bridged_mode, t) / (2 * bridged_mode.lam),
                       rtol=1e-12, atol=1e-300)


def test_single_mode_is_u_shaped(bridged_mode):
    curve = total_error([bridged_mode], default_time_grid([bridged_mode]))
    assert empirical_shape(curve.values) is CurveShape.U_SHAPED
    assert not detect_double_descent(curve, modes=[bridged_mode]).detected


def test_double_descent_configuration():
    mi = ModeParams.from_eta(100.0, 2.5, 0.0025, 0.0025, 0.01, 0.5, 9)
    mj = ModeParams.from_eta(1.0, 2.5, 0.0025, 0.0025, 0.01, 0.8, 1)
    v = detect_double_descent(total_error([mi, mj], default_time_grid([mi, mj])), 1e-4, [mi, mj])
    assert v.detected and v.necessary_condition_holds
    assert v.first_min_t < v.peak_t < v.second_min_t


def test_no_active_modes_gives_constant():
    frozen = ModeParams.from_eta(1.0, 2.5, 0.1, 0.0, 0.0, 0.5)  # balanced at zero
    curve = total_error([], np.linspace(0, 1, 5), const_term=0.7)
    assert np.all(curve.values == 0.7)
    curve = total_error([frozen], np.linspace(0, 1, 5), const_term=0.7)
    assert np.allclose(curve.values, 0.7 + 0.5 * 1.25 ** 2)


def test_multiplicity_weights():
    m = random_modes(31, 1)[0]
    t = np.linspace(0, 10, 7)
    assert np.allclose(total_error([m.with_(multiplicity=4)], t).values, 4 * total_error([m], t).values)


def test_constant_term_cases():
    assert constant_error_term(zbar=np.diag([1.0, 2.0]), lambdas=np.ones(2), noise_cov=np.zeros((2, 2))) == 0.0
    assert constant_error_term(noise_cov=np.diag([1.5, 0.5])) == pytest.approx(1.0)
    inactive = ModeParams.from_eta(1.0, 1.0, 0.1, 0.0, 0.0, 0.0)  # zbar = 1, stuck at 0
    assert constant_error_term(inactive_modes=[inactive]) == pytest.approx(0.5)


def test_inactive_mode_term_against_monte_carlo():
    # one input direction whose weight is frozen at zero: error 1/2 lambda zbar^2 plus noise
    ds = synthesize_exact(20, 2, 2, [1.0, 1.0], [1.0, 0.5], [0.0, 0.0], seed=5)
    W = np.zeros_like(ds.Wbar)
    mean, se = monte_carlo_error(ds, W, 200_000, seed=6)
    expected = constant_error_term(inactive_modes=[ModeParams.from_eta(1.0, 1.0, 0.1, 0.0, 0.0, 0.0),
                                                   ModeParams.from_eta(1.0, 0.5, 0.1, 0.0, 0.0, 0.0)],
                                   noise_cov=ds.noise_cov)
    assert abs(mean - expected) < 3 * se


@pytest.mark.parametrize("mode,shape", [
    (ModeParams.from_eta(1.0, 2.5, 0.01, 0.01, 0.01, 0.0), CurveShape.MONOTONE_DECREASING),
    (ModeParams.from_eta(1.0, 2.5, 0.01, 0.01, 0.0, 1.0), CurveShape.MONOTONE_INCREASING),
    (ModeParams.from_eta(1.0, 2.5, 0.01, 0.01, 0.01, 0.5), CurveShape.U_SHAPED),
    (ModeParams.from_eta(1.0, 2.5, 0.01, 0.0, 0.0, 0.5), CurveShape.CONSTANT),
])
def test_shape_law(mode, shape):
    assert classify_mode_curve(mode) is shape
    if shape is not CurveShape.CONSTANT:
        t = np.linspace(0, 5e3, 3001)
        assert empirical_shape(total_error([mode], t).values) is shape


def test_monte_carlo_exact_at_truth_without_noise():
    ds = synthesize_sampled(30, 3, 2, np.eye(3), np.ones((2, 3)), np.zeros((2, 2)), seed=1)
    mean, se = monte_carlo_error(ds, ds.Wbar, 1000, seed=2)
    assert mean == 0.0 and se == 0.0


def test_monte_carlo_at_zero_weights():
    ds = synthesize_sampled(30, 3, 2, np.diag([2.0, 1.0, 0.5]), np.arange(6.0).reshape(2, 3) / 5,
                            np.diag([0.3, 0.1]), seed=1)
    W = np.zeros((2, 3))
    expected = 0.5 * (np.trace(ds.Wbar @ ds.true_cov @ ds.Wbar.T) + np.trace(ds.noise_cov))
    assert analytic_expected_error(ds, W) == pytest.approx(expected, rel=1e-14)
    mean, se = monte_carlo_error(ds, W, 100_000, seed=3)
    assert abs(mean - expected) < 3 * se


def test_csv_format(bridged_mode, tmp_path):
    curve = total_error([bridged_mode, bridged_mode.with_(rho=0.2)], np.array([0.0, 1.0, 2.5]), 0.125)
    path = tmp_path / "c.csv"
    write_curve_csv(str(path), curve, ["a", "b"])
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "total", "const", "a", "b"]
    assert float(rows[2][1]) == curve.values[1]  # 17 digits round-trip exactly
    assert rows[1][2] == "0.125"
