import math

import pytest
from hypothesis import given, strategies as st

from epochdd.errors import ConditionViolation, DegenerateMode, ParameterError, RankViolation
from epochdd.numerics import IntegratorConfig, integrate_ab
from epochdd.spectral import (ModeParams, Reason, check_conditions, classify_activity,
                              conserved_gamma, effective_rate, global_minimum, is_active,
                              true_weight)


@pytest.mark.parametrize("a0,b0,ea,eb,expected", [
    (1.0, 1.0, 0.1, 0.1, 0.0),
    (0.0, 0.0, 0.3, 0.7, 0.0),
    (1.0, 0.5, 0.2, 0.4, 0.35),
])
def test_conserved_gamma_values(a0, b0, ea, eb, expected):
    assert conserved_gamma(a0, b0, ea, eb) == pytest.approx(expected, abs=1e-15)


def test_conserved_gamma_survives_integration():
    g0 = conserved_gamma(1.0, 0.5, 0.2, 0.4)
    tr = integrate_ab(1.0, 0.5, 1.0, 2.0, 0.2, 0.4, IntegratorConfig(1e-3, 10.0))
    assert abs(0.4 * tr.a[-1] ** 2 - 0.2 * tr.b[-1] ** 2 - g0) < 1e-10


@pytest.mark.parametrize("gamma,eta,expected", [(0.005, 0.0, 0.005), (0.0, 0.0, 0.0), (0.0, 0.005, 0.025)])
def test_effective_rate(gamma, eta, expected):
    m = ModeParams.from_eta(1.0, 2.5, eta, gamma, 0.0, 0.5)
    assert effective_rate(m) == pytest.approx(expected, rel=1e-15, abs=0)


def test_global_minimum_and_true_weight():
    m = ModeParams.from_eta(1.0, 2.5, 0.1, 0.1, 0.01, 0.5)
    assert global_minimum(m) == 2.5
    assert true_weight(m) == 1.25
    assert global_minimum(m.with_(sigma=0.0)) == 0.0
    assert global_minimum(m.with_(sigma=3.0, lam=2.0)) == 1.5
    assert true_weight(m.with_(rho=1.0, z0=0.0)) == 0.0
    assert true_weight(m.with_(rho=0.0)) == global_minimum(m)


def test_global_minimum_needs_positive_lambda():
    with pytest.raises(DegenerateMode):
        global_minimum(ModeParams.from_eta(0.0, 0.0, 0.1, 0.1, 0.0, 0.5))


@pytest.mark.parametrize("field,value", [("lam", -1.0), ("eta_a", -0.1), ("rho", 1.5), ("z0", math.nan),
                                         ("multiplicity", 0)])
def test_type_invariants(field, value):
    kw = dict(lam=1.0, sigma=1.0, eta_a=0.1, eta_b=0.1, gamma=0.1, z0=0.1, rho=0.5, multiplicity=1)
    kw[field] = value
    with pytest.raises(ParameterError):
        ModeParams(**kw)


def test_rank_violation_names_condition():
    with pytest.raises(RankViolation) as info:
        check_conditions(ModeParams.from_eta(0.0, 1.0, 0.1, 0.1, 0.0, 0.5))
    assert info.value.condition == "iv"


def test_z0_outside_true_weight_is_condition_i():
    with pytest.raises(ConditionViolation) as info:
        check_conditions(ModeParams.from_eta(1.0, 2.5, 0.1, 0.1, 2.0, 0.5))
    assert info.value.condition == "i"


def test_activity_classes():
    assert classify_activity(ModeParams.from_eta(1.0, 2.5, 0.1, 0.0, 0.0, 0.5)).reason is Reason.FIXED_POINT_INIT
    assert classify_activity(ModeParams.from_eta(1.0, 0.0, 0.1, 0.1, 0.0, 0.0)).reason is Reason.ZERO_SIGMA
    assert classify_activity(ModeParams.from_eta(1.0, 2.5, 0.0, 0.0, 0.01, 0.5)).reason is Reason.ZERO_EFFECTIVE_RATE
    assert is_active(ModeParams.from_eta(1.0, 2.5, 0.0, 0.005, 0.01, 0.5))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 2), st.floats(0, 2))
def test_gamma_is_antisymmetric_under_layer_swap(a0, b0, ea, eb):
    assert conserved_gamma(a0, b0, ea, eb) == pytest.approx(-conserved_gamma(b0, a0, eb, ea), abs=1e-12)
