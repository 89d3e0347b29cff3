import math

import numpy as np
import pytest

from epochdd.closed_form import z_general, z_one_layer
from epochdd.datagen import InitSpec, spectral_init, synthesize_exact
from epochdd.errors import DimensionError, Diverged, UnstableStep
from epochdd.numerics import (IntegratorConfig, Method, integrate_ab, integrate_full_network,
                              integrate_scalar, solve, train_gradient_descent, training_loss)
from epochdd.spectral import ModeParams, conserved_gamma


def test_scalar_matches_one_layer_closed_form(one_layer_mode):
    tr = integrate_scalar(one_layer_mode, IntegratorConfig(0.5, 2000.0))
    assert np.max(np.abs(tr.values - z_one_layer(one_layer_mode, tr.times))) < 1e-6


@pytest.mark.parametrize("mode", [
    ModeParams.from_eta(1.0, 2.5, 0.1, 0.0, 0.0, 0.5),   # balanced from zero
    ModeParams.from_eta(1.0, 2.5, 0.1, 0.3, 2.5, 0.0),   # at sigma/lambda
])
def test_scalar_fixed_points(mode):
    tr = integrate_scalar(mode, IntegratorConfig(0.01, 10.0))
    assert np.all(tr.values == mode.z0)


def test_exact_landing_on_requested_times(bridged_mode):
    t_eval = [0.0, 1.234, 50.0, 333.3]
    tr = integrate_scalar(bridged_mode, IntegratorConfig(0.1, 400.0), t_eval=t_eval)
    assert list(tr.times) == t_eval
    assert np.max(np.abs(tr.values - z_general(bridged_mode, np.array(t_eval)))) < 1e-9


def test_rk4_beats_euler(bridged_mode):
    cfg = dict(step=1.0, t_max=600.0)
    exact = z_general(bridged_mode, 600.0)
    rk = integrate_scalar(bridged_mode, IntegratorConfig(**cfg)).values[-1]
    eu = integrate_scalar(bridged_mode, IntegratorConfig(**cfg, method=Method.EULER)).values[-1]
    assert abs(rk - exact) < 1e-3 * abs(eu - exact)


def test_stride_subsamples():
    times, states = solve(lambda y: -y, [1.0], IntegratorConfig(0.01, 1.0, sample_stride=10))
    assert times.size == 11
    assert states[-1, 0] == pytest.approx(math.exp(-1.0), rel=1e-9)


def test_unstable_step_rejected(bridged_mode):
    with pytest.raises(UnstableStep):
        integrate_scalar(bridged_mode, IntegratorConfig(100.0, 1000.0))


def test_ab_zero_and_symmetric():
    cfg = IntegratorConfig(0.01, 5.0)
    zero = integrate_ab(0.0, 0.0, 1.0, 2.0, 0.3, 0.5, cfg)
    assert np.all(zero.a == 0) and np.all(zero.b == 0)
    sym = integrate_ab(1.0, 1.0, 1.0, 2.0, 0.3, 0.3, cfg)
    assert np.array_equal(sym.a, sym.b)


def test_ab_product_matches_closed_form():
    a0, b0, lam, sig, ea, eb = 0.3, -0.1, 1.5, 2.0, 0.4, 0.9
    m = ModeParams.from_ab(a0, b0, lam, sig, ea, eb, 0.0)
    tr = integrate_ab(a0, b0, lam, sig, ea, eb, IntegratorConfig(1e-3, 20.0, sample_stride=50))
    assert np.max(np.abs(tr.z - z_general(m, tr.times))) < 1e-6
    assert np.max(np.abs(tr.gamma(ea, eb) - conserved_gamma(a0, b0, ea, eb))) < 1e-10
    assert len(tr.states()) == tr.times.size


@pytest.fixture(scope="module")
def small_problem():
    ds = synthesize_exact(32, 4, 3, [2.0, 1.0, 0.5, 0.3], [1.0, 0.8, 0.4], [0.2, 0.0, 0.5], seed=9)
    init = spectral_init(ds, InitSpec.standard(3, [0.1, 0.2, 0.3], [0.2, 0.1, 0.05]))
    return ds, init


def test_frozen_network(small_problem):
    ds, init = small_problem
    tr = integrate_full_network(ds, init, 0.0, 0.0, IntegratorConfig(0.1, 2.0))
    assert np.all(tr.W == tr.W[0])


def test_full_network_shape_checks(small_problem):
    ds, (W1, W2) = small_problem
    with pytest.raises(DimensionError):
        integrate_full_network(ds, (W1[:, :2], W2), 0.1, 0.1, IntegratorConfig(0.1, 1.0))


def test_gradient_descent_zero_epochs(small_problem):
    ds, init = small_problem
    tr = train_gradient_descent(ds, init, 0.1, 0.1, 0)
    assert np.array_equal(tr.W1[0], init[0]) and np.array_equal(tr.W2[0], init[1])


def test_gradient_descent_approaches_flow(small_problem):
    ds, init = small_problem
    eta_a, eta_b, T = 0.5, 0.8, 4.0
    flow = integrate_full_network(ds, init, eta_a, eta_b, IntegratorConfig(1e-3, T), t_eval=[T]).W[-1]
    errs = []
    for dt in (0.02, 0.01, 0.005):
        gd = train_gradient_descent(ds, init, eta_a * dt, eta_b * dt, int(round(T / dt)))
        errs.append(np.max(np.abs(gd.W[-1] - flow)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.1)  # first order in the step


def test_loss_non_increasing(small_problem):
    ds, init = small_problem
    gd = train_gradient_descent(ds, init, 0.05, 0.05, 300)
    assert np.all(np.diff(gd.losses) <= 1e-15)
    flow = integrate_full_network(ds, init, 0.5, 0.5, IntegratorConfig(1e-2, 10.0, sample_stride=10))
    losses = [training_loss(ds, W) for W in flow.W]
    assert np.all(np.diff(losses) <= 1e-15)


def test_divergence_detected(small_problem):
    ds, init = small_problem
    with pytest.warns(RuntimeWarning), pytest.raises(Diverged):
        train_gradient_descent(ds, init, 50.0, 50.0, 200)
