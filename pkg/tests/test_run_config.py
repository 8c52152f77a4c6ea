import json

import pytest

from exceptions import ParseError, ValidationError
from run_config import DEFAULTS, load_config, parse_config


def test_empty_document_gives_defaults():
    config = parse_config("")
    assert config.to_dict() == DEFAULTS
    assert config.scheme == "polar"
    assert config.target().name == "hyperbolic"
    assert config.grid().n == 200
    assert config.exact_solution() is None


def test_sections_are_merged():
    config = parse_config(json.dumps({"kappa": 0.5, "grid": {"n": 64}, "data": {"A": 0.05}}))
    assert config.kappa == 0.5
    assert config.grid_spec == {"r_max": 10.0, "n": 64}
    assert config.profile().A == 0.05
    assert config.profile().sigma == 1.0


def test_unknown_key_names_its_path():
    with pytest.raises(ParseError) as info:
        parse_config(json.dumps({"evolve": {"cfl": 0.4, "stepper": "rk3"}}))
    assert "evolve.stepper" in info.value.reason


def test_unknown_target_param():
    with pytest.raises(ParseError):
        parse_config(json.dumps({"target": {"kind": "sphere", "params": {"radius": 2}}}))


def test_duplicate_key():
    with pytest.raises(ParseError):
        parse_config('{"kappa": 1.0, "kappa": 2.0}')


def test_malformed_json_reports_position():
    with pytest.raises(ParseError) as info:
        parse_config('{"kappa": 1.0,\n "grid": }')
    assert "line 2" in info.value.reason


def test_all_violations_are_collected():
    with pytest.raises(ValidationError) as info:
        parse_config(json.dumps({"kappa": -1.0, "grid": {"n": 2}, "evolve": {"cfl": 2.0}}))
    violations = info.value.violations
    assert len(violations) == 3
    assert any(v.startswith("kappa") for v in violations)
    assert any(v.startswith("grid.n") for v in violations)
    assert any(v.startswith("evolve.cfl") for v in violations)


def test_exact_boundary_needs_polynomial_data():
    with pytest.raises(ValidationError):
        parse_config(json.dumps({"evolve": {"boundary": "exact"}}))
    config = parse_config(json.dumps({"data": {"kind": "poly", "solution": "cubic"}, "evolve": {"boundary": "exact"}}))
    assert config.evolve_config().exact is config.exact_solution()


def test_custom_target_needs_coefficients():
    with pytest.raises(ValidationError):
        parse_config(json.dumps({"target": {"kind": "custom"}}))
    config = parse_config(json.dumps({"target": {"kind": "custom", "params": {"coefficients": [1.0, 0.1]}}}))
    assert config.target().g(1.0) == pytest.approx(1.1)


def test_with_overrides():
    config = parse_config("").with_overrides(grid={"n": 32}, kappa=0.0)
    assert config.grid().n == 32
    assert config.kappa == 0.0
    assert config.grid_spec["r_max"] == 10.0


def test_null_grid_and_cone_settings():
    config = parse_config(json.dumps({"null": {"h": 0.25, "u_bar_max": 5.0}, "cone": {"vertex_time": 2.0}}))
    assert config.null_grid().n == 20
    assert config.null_grid(0.5).n == 10
    assert config.cone["vertex_time"] == 2.0
    with pytest.raises(ValidationError):
        parse_config(json.dumps({"cone": {"lambda_prime": 1.0}}))


def test_load_config(tmp_path, write_config):
    path = write_config({"scheme": "null"})
    assert load_config(path).scheme == "null"
    with pytest.raises(ParseError):
        load_config(str(tmp_path / "missing.json"))
