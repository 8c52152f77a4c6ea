import json
import math

import pytest

from config import worker_count
from convergence import convergence_study, observed_order, richardson_order
from exceptions import ValidationError
from run_config import parse_config


def test_observed_order():
    assert observed_order([4.0, 1.0, 0.25]) == pytest.approx([2.0, 2.0])
    assert math.isnan(observed_order([1.0, 0.0])[0])


def test_richardson_order():
    assert richardson_order(1.0, 0.25, 0.0625) == pytest.approx(2.0)
    assert math.isnan(richardson_order(1.0, 1.0, 1.0))


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("EWM_THREADS", "2")
    assert worker_count(8) == 2
    monkeypatch.setenv("EWM_THREADS", "many")
    assert worker_count(1) == 1


def test_study_validation():
    config = parse_config("")
    with pytest.raises(ValidationError):
        convergence_study(config, levels=2)
    with pytest.raises(ValidationError):
        convergence_study(config, observable="entropy")
    with pytest.raises(ValidationError):
        convergence_study(config.with_overrides(grid={"n": 8}), observable="field_error_vs_exact")


def test_energy_drift_order():
    config = parse_config(json.dumps({
        "grid": {"r_max": 10.0, "n": 100},
        "evolve": {"t_end": 1.0},
    }))
    report = convergence_study(config, levels=3, observable="E_drift")
    assert report["levels"] == [100, 200, 400]
    assert report["values"][-1] < 1e-3
    assert report["orders"][-1] >= 1.8


def test_polynomial_field_error_order():
    config = parse_config(json.dumps({
        "kappa": 0.0,
        "target": {"kind": "flat"},
        "grid": {"r_max": 1.0, "n": 20},
        "data": {"kind": "poly", "solution": "cubic"},
        "evolve": {"t_end": 0.5, "boundary": "exact", "dissipation_eps": 0.0},
    }))
    report = convergence_study(config, levels=3, observable="field_error_vs_exact")
    assert report["orders"][-1] > 1.5
    assert len(report["richardson_orders"]) == 1


def test_metric_identity_observable():
    config = parse_config(json.dumps({"grid": {"r_max": 10.0, "n": 50}, "evolve": {"t_end": 0.5}}))
    report = convergence_study(config, levels=3, observable="metric_identity")
    assert report["values"][0] > report["values"][-1]
    assert report["values"][-1] < 1e-4
