import json

import pytest

from sqha.config import RunConfig
from sqha.errors import ConfigError, InvalidFieldError, UnresolvedCorrelationError


def test_round_trip():
    cfg = RunConfig.from_dict({"grid": {"N": 256, "L": 30}, "potential": "power_tail:1,0.5",
                               "noise": {"theta": 0.01}, "seed": 4, "dt": "0.001"})
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert cfg.dt == 0.001 and cfg.potential_spec.tail_exponent == 0.5


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"gird": {}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"noise": {"temperature": 1.0}})


def test_dt_above_bound_is_substepped():
    cfg = RunConfig.from_dict({"grid": {"N": 128, "L": 20}, "dt": 0.05})
    dt, sub, inner = cfg.resolve_dt()
    bound = cfg.resolution()["dt_bound"]
    assert dt == 0.05 and sub > 1 and inner <= bound and inner * sub == pytest.approx(dt)
    assert RunConfig.from_dict({"grid": {"N": 128, "L": 20}}).resolve_dt()[1] == 1


def test_validation_catches_bad_values():
    with pytest.raises(UnresolvedCorrelationError):
        RunConfig.from_dict({"grid": {"N": 64, "L": 64}, "noise": {"theta": 1.0}}).validate()
    for bad in ({"steps": -1}, {"init": {"sigma": 0}}, {"tracers": {"count": -2}},
                {"scan": {"trials": 0}}, {"limit": {"threshold": 0}}, {"dt": -1.0},
                {"grid": {"N": 7, "L": 10}}):
        with pytest.raises((ConfigError, InvalidFieldError)) as exc:
            RunConfig.from_dict(bad).validate()
        assert exc.value.exit_status == 2


def test_crossing_time():
    cfg = RunConfig.from_dict({"init": {"gaussian": {"sigma": 2.0, "momentum": 4.0}}})
    assert cfg.crossing_time() == 0.5
    with pytest.raises(ConfigError):
        RunConfig().crossing_time()


def test_deterministic_resolution_reports_infinite_correlation():
    assert RunConfig().resolution()["lambda_c"] == "INFINITE_CORRELATION"


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "bad.json")
