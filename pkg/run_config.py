"""
Run configuration: JSON document with nested sections, defaults applied,
unknown keys rejected and every range violation reported at once
"""
import copy
import json
import math
import logging
from typing import Dict, List, Optional

from config import (DEFAULT_BOUNDARY, DEFAULT_CFL, DEFAULT_DISSIPATION_EPS, DEFAULT_KAPPA, DEFAULT_LAMBDA_PRIME,
                    DEFAULT_MONITOR_THRESHOLD, DEFAULT_OUTPUT_DIR, DEFAULT_OUTPUT_EVERY, DEFAULT_SERIES_SWITCH)
from exceptions import ParseError, ValidationError
from target_configs import TARGET_KINDS

logger = logging.getLogger(__name__)

SCHEMES = ("polar", "null")

DEFAULTS = {
    "scheme": "polar",
    "kappa": DEFAULT_KAPPA,
    "seed": 0,
    "target": {"kind": "hyperbolic", "params": {}},
    "grid": {"r_max": 10.0, "n": 200},
    "data": {"kind": "centered", "A": 0.1, "sigma": 1.0, "r0": 0.0, "time_symmetric": True,
             "ingoing": 1.0, "table": None, "solution": "quad", "t0": 0.0},
    "evolve": {"cfl": DEFAULT_CFL, "t_end": 1.0, "dissipation_eps": DEFAULT_DISSIPATION_EPS,
               "boundary": DEFAULT_BOUNDARY, "output_every": DEFAULT_OUTPUT_EVERY,
               "monitor_threshold": DEFAULT_MONITOR_THRESHOLD},
    "null": {"h": 0.05, "u_bar_max": 10.0},
    "cone": {"vertex_time": None, "lambda_prime": DEFAULT_LAMBDA_PRIME},
    "output": {"dir": DEFAULT_OUTPUT_DIR, "cadence": 1, "dump_format": "text"},
}

TARGET_PARAM_KEYS = ("coefficients", "series_switch")


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ParseError(f"Duplicate key '{key}' in configuration.", f"key: {key}")
        out[key] = value
    return out


def _merge(defaults: Dict, given: Dict, path: str) -> Dict:
    merged = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ParseError(f"Unknown configuration key '{where}'.", f"key: {where}")
        if isinstance(defaults[key], dict) and key != "params":
            if not isinstance(value, dict):
                raise ParseError(f"Configuration key '{where}' must be a table.", f"got {type(value).__name__}")
            merged[key] = _merge(defaults[key], value, where)
        else:
            merged[key] = value
    return merged


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


class RunConfig:
    """Validated run configuration; sections are plain dicts."""

    def __init__(self, doc: Dict):
        self.doc = doc
        self.scheme = doc["scheme"]
        self.kappa = float(doc["kappa"])
        self.seed = int(doc["seed"])
        self.target_spec = doc["target"]
        self.grid_spec = doc["grid"]
        self.data = doc["data"]
        self.evolve = doc["evolve"]
        self.null = doc["null"]
        self.cone = doc["cone"]
        self.output = doc["output"]

    def __repr__(self):
        return f"RunConfig(scheme={self.scheme!r}, kappa={self.kappa}, target={self.target_spec['kind']!r})"

    def to_dict(self) -> Dict:
        return copy.deepcopy(self.doc)

    def target(self):
        from target import build_target
        return build_target(self.target_spec)

    def grid(self, n: Optional[int] = None):
        from initdata import RadialGrid
        return RadialGrid.from_extent(self.grid_spec["r_max"], n or self.grid_spec["n"])

    def profile(self):
        from initdata import DataProfile
        return DataProfile(**self.data)

    def exact_solution(self):
        if self.data["kind"] != "poly":
            return None
        from flatwave import exact_poly_solution
        return exact_poly_solution(self.data["solution"])

    def evolve_config(self, cfl: Optional[float] = None):
        from evolve_polar import EvolveConfig
        spec = self.evolve
        return EvolveConfig(t_end=spec["t_end"], cfl=cfl or spec["cfl"], dissipation_eps=spec["dissipation_eps"],
                            output_every=spec["output_every"], boundary=spec["boundary"],
                            monitor_threshold=spec["monitor_threshold"], exact=self.exact_solution())

    def null_grid(self, h: Optional[float] = None):
        from evolve_null import NullGrid
        return NullGrid.from_extent(self.null["u_bar_max"], h or self.null["h"])

    def with_overrides(self, **sections) -> "RunConfig":
        doc = self.to_dict()
        for section, values in sections.items():
            if isinstance(doc.get(section), dict):
                doc[section].update(values)
            else:
                doc[section] = values
        return RunConfig(doc)


def _validate(doc: Dict) -> List[str]:
    violations = []

    def number(path, value, lo=None, hi=None, lo_open=False, hi_open=False):
        if not _is_number(value):
            violations.append(f"{path} must be a finite number, got {value!r}")
            return
        if lo is not None and (value < lo or (lo_open and value == lo)):
            violations.append(f"{path} must be {'>' if lo_open else '>='} {lo}, got {value}")
        if hi is not None and (value > hi or (hi_open and value == hi)):
            violations.append(f"{path} must be {'<' if hi_open else '<='} {hi}, got {value}")

    def integer(path, value, lo):
        if not isinstance(value, int) or isinstance(value, bool) or value < lo:
            violations.append(f"{path} must be an integer >= {lo}, got {value!r}")

    def choice(path, value, options):
        if value not in options:
            violations.append(f"{path} must be one of {', '.join(options)}, got {value!r}")

    choice("scheme", doc["scheme"], SCHEMES)
    number("kappa", doc["kappa"], lo=0.0)
    integer("seed", doc["seed"], 0)

    target = doc["target"]
    choice("target.kind", target.get("kind"), TARGET_KINDS)
    params = target.get("params") or {}
    if not isinstance(params, dict):
        violations.append("target.params must be a table")
        params = {}
    for key in params:
        if key not in TARGET_PARAM_KEYS:
            raise ParseError(f"Unknown configuration key 'target.params.{key}'.", f"key: target.params.{key}")
    number("target.params.series_switch", params.get("series_switch", DEFAULT_SERIES_SWITCH), lo=0.0, lo_open=True)
    if target.get("kind") == "custom":
        coefficients = params.get("coefficients")
        if not isinstance(coefficients, list) or not coefficients or not all(_is_number(c) for c in coefficients):
            violations.append("target.params.coefficients must be a non-empty list of finite numbers")

    number("grid.r_max", doc["grid"]["r_max"], lo=0.0, lo_open=True)
    integer("grid.n", doc["grid"]["n"], 4)

    data = doc["data"]
    choice("data.kind", data["kind"], ("centered", "shell", "custom-table", "poly"))
    number("data.A", data["A"])
    number("data.sigma", data["sigma"], lo=0.0, lo_open=True)
    number("data.r0", data["r0"], lo=0.0)
    number("data.ingoing", data["ingoing"])
    number("data.t0", data["t0"])
    if not isinstance(data["time_symmetric"], bool):
        violations.append(f"data.time_symmetric must be true or false, got {data['time_symmetric']!r}")
    if data["kind"] == "custom-table" and not data["table"]:
        violations.append("data.table must list [r, phi0, Pi0] rows for kind custom-table")
    if data["kind"] == "poly":
        choice("data.solution", data["solution"], ("const", "linear", "quad", "cubic"))

    evolve = doc["evolve"]
    number("evolve.cfl", evolve["cfl"], lo=0.0, hi=1.0, lo_open=True)
    number("evolve.t_end", evolve["t_end"], lo=0.0)
    number("evolve.dissipation_eps", evolve["dissipation_eps"], lo=0.0)
    number("evolve.monitor_threshold", evolve["monitor_threshold"], lo=1.0)
    integer("evolve.output_every", evolve["output_every"], 1)
    choice("evolve.boundary", evolve["boundary"], ("outgoing", "frozen", "exact"))
    if evolve["boundary"] == "exact" and data["kind"] != "poly":
        violations.append("evolve.boundary 'exact' needs data.kind 'poly'")

    number("null.h", doc["null"]["h"], lo=0.0, lo_open=True)
    number("null.u_bar_max", doc["null"]["u_bar_max"], lo=0.0, lo_open=True)
    if _is_number(doc["null"]["h"]) and _is_number(doc["null"]["u_bar_max"]):
        if doc["null"]["u_bar_max"] < 3.0 * doc["null"]["h"]:
            violations.append("null.u_bar_max must be at least 3 * null.h")

    cone = doc["cone"]
    if cone["vertex_time"] is not None:
        number("cone.vertex_time", cone["vertex_time"], lo=0.0, lo_open=True)
    number("cone.lambda_prime", cone["lambda_prime"], lo=0.0, hi=1.0, lo_open=True, hi_open=True)

    output = doc["output"]
    if not isinstance(output["dir"], str) or not output["dir"]:
        violations.append("output.dir must be a non-empty path")
    integer("output.cadence", output["cadence"], 0)
    choice("output.dump_format", output["dump_format"], ("text", "binary", "none"))
    return violations


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    try:
        given = json.loads(text, object_pairs_hook=_reject_duplicates) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid configuration at line {e.lineno}, column {e.colno}.", e.msg)
    if not isinstance(given, dict):
        raise ParseError("Configuration must be a table at the top level.", f"got {type(given).__name__}")

    doc = _merge(DEFAULTS, given, "")
    violations = _validate(doc)
    if violations:
        raise ValidationError(f"Configuration has {len(violations)} invalid value(s).", violations)
    config = RunConfig(doc)
    logger.debug(f"Parsed {config!r}")
    return config


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"Cannot read configuration file '{path}'.", str(e))
    return parse_config(text)
