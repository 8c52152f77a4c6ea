"""
Field dumps: one JSON header line, then either decimal text rows or a raw
little-endian float64 block with the same column layout
"""
import json
import logging
import os
from typing import Dict, Tuple

import numpy as np

from config import CSV_FORMAT
from exceptions import ParseError, ValidationError
from initdata import PolarState, RadialGrid
from target import build_target

logger = logging.getLogger(__name__)

DUMP_FORMATS = ("text", "binary", "none")
POLAR_COLUMNS = ("r", "phi", "Phi", "Pi", "alpha", "beta")
NULL_COLUMNS = ("u", "u_bar", "r", "Omega", "phi", "lambda", "nu", "m")


def _write(path: str, header: Dict, table: np.ndarray, fmt: str):
    if fmt not in DUMP_FORMATS:
        raise ValidationError("Unknown dump format.", [f"output.dump_format must be one of {', '.join(DUMP_FORMATS)}"])
    if fmt == "none":
        return None
    header = dict(header, format=fmt)
    if fmt == "text":
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(header) + "\n")
            np.savetxt(f, table, fmt=CSV_FORMAT)
    else:
        with open(path, "wb") as f:
            f.write((json.dumps(header) + "\n").encode("utf-8"))
            f.write(np.ascontiguousarray(table, dtype="<f8").tobytes())
    logger.debug(f"Wrote {table.shape[0]} rows to {path} ({fmt})")
    return path


def _read(path: str) -> Tuple[Dict, np.ndarray]:
    with open(path, "rb") as f:
        first = f.readline()
        rest = f.read()
    try:
        header = json.loads(first.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ParseError(f"Dump {path} has no valid header line.", str(e))
    columns = header.get("columns")
    if not columns:
        raise ParseError(f"Dump {path} header lists no columns.", first.decode("utf-8", "replace").strip())
    try:
        if header.get("format") == "binary":
            table = np.frombuffer(rest, dtype="<f8").reshape(-1, len(columns)).copy()
        else:
            table = np.loadtxt(rest.decode("utf-8").splitlines(), ndmin=2)
    except (UnicodeDecodeError, ValueError) as e:
        raise ParseError(f"Dump {path} body is truncated or malformed.", str(e))
    if table.size and table.shape[1] != len(columns):
        raise ParseError(f"Dump {path} rows do not match its columns.",
                         f"{table.shape[1]} values per row for {len(columns)} columns")
    return header, table


def write_polar_dump(state: PolarState, path: str, fmt: str = "text"):
    header = {"kind": "polar", "t": state.t, "n": state.grid.n, "dr": state.grid.dr, "kappa": state.kappa,
              "target": state.target.to_spec(), "columns": list(POLAR_COLUMNS)}
    table = np.column_stack([state.r, state.phi, state.Phi, state.Pi, state.alpha, state.beta])
    return _write(path, header, table, fmt)


def read_polar_dump(path: str) -> PolarState:
    """Rebuild a polar slice from a dump; the stored metric is kept as written."""
    header, table = _read(path)
    if header.get("kind", "polar") != "polar":
        raise ParseError(f"Dump {path} is not a polar slice.", f"kind={header.get('kind')}")
    grid = RadialGrid(int(header["n"]), float(header["dr"]))
    if table.shape != (grid.n + 1, len(POLAR_COLUMNS)):
        raise ParseError(f"Dump {path} has the wrong shape.", f"expected {(grid.n + 1, len(POLAR_COLUMNS))}, got {table.shape}")
    target = build_target(header.get("target"))
    _, phi, Phi, Pi, alpha, beta = table.T
    return PolarState(float(header["t"]), grid, phi, Phi, Pi, alpha, beta, float(header["kappa"]), target)


def write_null_dump(state, path: str, fmt: str = "text"):
    """One row per computed node, cone by cone in u."""
    from evolve_null import null_mass
    grid = state.grid
    i, j = np.nonzero(grid.domain)
    m = null_mass(state)
    table = np.column_stack([grid.u[i], grid.u_bar[j], state.r[i, j], state.Omega[i, j], state.phi[i, j],
                             state.lam[i, j], state.nu[i, j], m[i, j]])
    header = {"kind": "null", "h": grid.h, "n": grid.n, "kappa": state.kappa,
              "target": state.target.to_spec(), "columns": list(NULL_COLUMNS)}
    return _write(path, header, table, fmt)


def read_null_table(path: str) -> Tuple[Dict, np.ndarray]:
    header, table = _read(path)
    if header.get("kind") != "null":
        raise ParseError(f"Dump {path} is not a null dump.", f"kind={header.get('kind')}")
    return header, table


def dump_path(out_dir: str, stem: str, index: int, fmt: str) -> str:
    suffix = "txt" if fmt == "text" else "bin"
    return os.path.join(out_dir, f"{stem}_{index:05d}.{suffix}")
