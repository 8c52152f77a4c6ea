import json

import pytest

from initdata import DataProfile, RadialGrid, build_initial_state
from target import build_target


@pytest.fixture
def hyperbolic():
    return build_target({"kind": "hyperbolic"})


@pytest.fixture
def flat():
    return build_target({"kind": "flat"})


@pytest.fixture
def sphere():
    return build_target({"kind": "sphere"})


@pytest.fixture
def vacuum_state(hyperbolic):
    return build_initial_state(DataProfile(A=0.0), RadialGrid.from_extent(10.0, 50), 1.0, hyperbolic)


@pytest.fixture
def pulse_state(hyperbolic):
    """Small centered pulse, well inside the subcritical regime."""
    return build_initial_state(DataProfile(A=0.1, sigma=1.0), RadialGrid.from_extent(10.0, 100), 1.0, hyperbolic)


@pytest.fixture
def write_config(tmp_path):
    def write(doc, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)
    return write
