import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from epochdd.config import (ExperimentConfig, SweepSpec, TimeGridSpec, apply_sweep, emit, from_dict,
                            load, parse, to_dict)
from epochdd.errors import ConditionViolation, ConfigError
from epochdd.spectral import ModeParams

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MODE = {"lambda": 1.0, "sigma": 2.5, "eta": 0.0025, "gamma": 0.0025, "z0": 0.01, "rho": 0.5}


@pytest.mark.parametrize("name", ["bridged_lambda_sweep.json", "single_point.json"])
def test_shipped_configs_are_canonical_fixed_points(name):
    cfg = load(str(CONFIGS / name))
    text = emit(cfg)
    assert emit(parse(text)) == text
    assert parse(text) == cfg


def test_eta_shorthand_expands():
    cfg = from_dict({"modes": [MODE]})
    m = cfg.modes[0]
    assert m.eta_a == m.eta_b == 0.0025 and m.multiplicity == 1
    assert "eta" not in json.loads(emit(cfg))["modes"][0]


@pytest.mark.parametrize("bad", [
    {"modes": []},
    {"modes": [dict(MODE, colour=1)]},
    {"modes": [dict(MODE, eta_a=0.1)]},
    {"modes": [{k: v for k, v in MODE.items() if k != "sigma"}]},
    {"modes": [dict(MODE, sigma="x")]},
    {"modes": [MODE], "sweep": {"parameter": "width", "values": [1]}},
    {"modes": [MODE], "sweep": {"parameter": "lambda_i", "values": []}},
    {"modes": [MODE], "sweep": {"parameter": "lambda_i", "values": [1], "mode_index": 3}},
    {"modes": [MODE], "t_grid": {"lo": 0.0, "hi": 10.0}},
    {"modes": [MODE], "t_grid": {"lo": 1.0}},
    {"modes": [MODE], "t_grid": {"spacing": "cubic"}},
    {"modes": [MODE], "prominence": 0},
    {"modes": [MODE], "extra": True},
    [],
])
def test_malformed_configs_raise_config_error(bad):
    with pytest.raises(ConfigError):
        from_dict(bad)


def test_invalid_json_and_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse("{not json")
    with pytest.raises(ConfigError):
        load(str(tmp_path / "nope.json"))


def test_out_of_range_rho_is_a_condition_violation():
    with pytest.raises(ConditionViolation):
        from_dict({"modes": [dict(MODE, rho=1.5)]})
    with pytest.raises(ConditionViolation):
        apply_sweep([ModeParams.from_eta(1, 1, 0.1, 0.1, 0.01, 0.5)], "rho_i", -0.1)


def test_sweep_points():
    base = ModeParams.from_eta(1, 1, 0.1, 0.1, 0.01, 0.5)
    cfg = ExperimentConfig((base, base), sweep=SweepSpec("lambda_i", (2.0, 3.0), 1))
    pts = cfg.points()
    assert [v for v, _ in pts] == [2.0, 3.0]
    assert pts[1][1][1].lam == 3.0 and pts[1][1][0].lam == 1.0
    assert all(m.eta_a == 0.5 for m in apply_sweep([base, base], "eta", 0.5))


def test_explicit_grid():
    assert TimeGridSpec().explicit() is None
    g = TimeGridSpec(1.0, 100.0, 3, "log").explicit()
    assert list(g) == pytest.approx([1, 10, 100])
    assert list(TimeGridSpec(0.0, 2.0, 3, "linear").explicit()) == [0, 1, 2]


pos = st.floats(1e-3, 1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(lam=pos, sigma=pos, eta_a=st.floats(0, 1), eta_b=st.floats(0, 1), gamma=st.floats(-1, 1),
       z0=st.floats(0, 1), rho=st.floats(0, 1), mult=st.integers(1, 20),
       prom=st.floats(1e-8, 1), seed=st.integers(0, 2 ** 31))
def test_round_trip(lam, sigma, eta_a, eta_b, gamma, z0, rho, mult, prom, seed):
    m = ModeParams(lam, sigma, eta_a, eta_b, gamma, z0, rho, mult)
    cfg = ExperimentConfig((m,), TimeGridSpec(0.1, 50.0, 300), SweepSpec("z0", (0.0, z0)), prom, "o", seed)
    text = emit(cfg)
    assert parse(text) == cfg
    assert emit(parse(text)) == text
    assert from_dict(to_dict(cfg)) == cfg
