#!/usr/bin/env python3
"""
Einstein-wave map simulator
Command line entry point: init, evolve, diagnose, kernels, convergence and contrast subcommands.
"""
import os
import sys
import json
import math
import logging
import argparse
from typing import List, Optional

import numpy as np

from config import CSV_FORMAT, DIAG_FILENAME, init_logging
from exceptions import EwmException

init_logging()
logger = logging.getLogger(__name__)


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, np.integer):
        return int(value)
    return value


def _out_dir(args, config) -> str:
    out_dir = args.out_dir or config.output["dir"]
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def cmd_init(args) -> int:
    from dump_io import write_null_dump, write_polar_dump
    from evolve_null import derive_fields, init_characteristic_data
    from initdata import build_initial_state, check_subcriticality
    from run_config import load_config

    config = load_config(args.config)
    scheme = args.scheme or config.scheme
    out_dir = _out_dir(args, config)
    fmt = config.output["dump_format"]
    if scheme == "null":
        state = derive_fields(init_characteristic_data(config.profile(), config.null_grid(), config.kappa,
                                                       config.target()))
        write_null_dump(state, os.path.join(out_dir, "init_null.txt" if fmt != "binary" else "init_null.bin"), fmt)
        report = {"scheme": "null", "lambda_min": float(np.nanmin(state.lam[0]))}
    else:
        state = build_initial_state(config.profile(), config.grid(), config.kappa, config.target())
        write_polar_dump(state, os.path.join(out_dir, "init.txt" if fmt != "binary" else "init.bin"), fmt)
        report = dict(check_subcriticality(state), scheme="polar")
    print(json.dumps(_jsonable(report)))
    return 0


def _evolve_polar(config, out_dir: str) -> dict:
    from diagnostics import DiagnosticsSink, attach_cone_energies, cone_boundary, write_diag_csv
    from dump_io import dump_path, write_polar_dump
    from evolve_polar import evolve_run
    from initdata import build_initial_state

    state0 = build_initial_state(config.profile(), config.grid(), config.kappa, config.target())
    vertex = config.cone["vertex_time"]
    cadence = config.output["cadence"]
    fmt = config.output["dump_format"]
    sink = DiagnosticsSink(keep_slices=vertex is not None or (cadence > 0 and fmt != "none"))
    result = evolve_run(state0, config.evolve_config(), sink)

    if vertex is not None:
        cone = cone_boundary(sink.slices, min(vertex, result.state.t), config.cone["lambda_prime"])
        attach_cone_energies(sink.records, sink.slices, cone)
    write_diag_csv(sink.records, os.path.join(out_dir, DIAG_FILENAME))

    dumps = 0
    if cadence > 0 and fmt != "none":
        for index, state in enumerate(sink.slices):
            if index % cadence == 0 or index == len(sink.slices) - 1:
                write_polar_dump(state, dump_path(out_dir, "field", index, fmt), fmt)
                dumps += 1
    return {"scheme": "polar", "t": result.state.t, "steps": result.steps, "halted": result.halted,
            "halt_reason": result.halt_reason, "dumps": dumps}


def _evolve_null(config, out_dir: str) -> dict:
    from diagnostics import null_regularity_monitor
    from dump_io import write_null_dump
    from evolve_null import classify_regions, init_characteristic_data, null_constraint_residuals, run_null

    state0 = init_characteristic_data(config.profile(), config.null_grid(), config.kappa, config.target())
    result = run_null(state0)
    fmt = config.output["dump_format"]
    if fmt != "none":
        write_null_dump(result.state, os.path.join(out_dir, "null.txt" if fmt == "text" else "null.bin"), fmt)

    columns = ("u_bar", "m_max", "lam_min", "nu_max", "phi_max")
    rows = np.array([[record[c] for c in columns] for record in result.records], dtype=float)
    np.savetxt(os.path.join(out_dir, "null_" + DIAG_FILENAME), rows, fmt=CSV_FORMAT, delimiter=",",
               header=",".join(columns), comments="")

    labels = classify_regions(result.state)
    counts = {label: int(np.sum(labels == label)) for label in ("R", "T", "A", "X")}
    return {"scheme": "null", "regions": counts, "constraints": null_constraint_residuals(result.state),
            "monitor": null_regularity_monitor(result.state, axis_gap=config.null["h"])}


def cmd_evolve(args) -> int:
    from run_config import load_config

    config = load_config(args.config)
    scheme = args.scheme or config.scheme
    out_dir = _out_dir(args, config)
    summary = _evolve_null(config, out_dir) if scheme == "null" else _evolve_polar(config, out_dir)
    print(json.dumps(_jsonable(summary)))
    return 0


def cmd_diagnose(args) -> int:
    from diagnostics import metric_bounds, record_diagnostics, wp_bound
    from dump_io import read_polar_dump
    from initdata import energy, solve_metric_slice

    state = read_polar_dump(args.dump)
    stored_beta = state.beta.copy()
    solve_metric_slice(state)
    logger.debug(f"Re-solved metric differs from the dump by {np.max(np.abs(state.beta - stored_beta)):.3e} in beta")
    record = record_diagnostics(state, r_ball=args.r_ball)
    output = record.to_dict()
    output["metric_bounds"] = metric_bounds(state, energy(state))
    output["wp_bound"] = wp_bound(state)
    print(json.dumps(_jsonable(output)))
    return 0


def cmd_kernels(args) -> int:
    from exceptions import ValidationError
    from flatwave import kernel_sample

    if args.samples < 1:
        raise ValidationError("Need at least one kernel sample.", [f"--samples must be >= 1, got {args.samples}"])
    mus = np.linspace(args.mu_min, args.mu_max, args.samples)
    samples = [kernel_sample(mu) for mu in mus]
    rows = np.array([[s.mu, s.K_val, s.J_val, s.err_K, s.err_J] for s in samples], dtype=float)
    directory = os.path.dirname(args.out)
    if directory:
        os.makedirs(directory, exist_ok=True)
    np.savetxt(args.out, rows, fmt=CSV_FORMAT, delimiter=",", header="mu,K,J,err_K,err_J", comments="")
    logger.info(f"Wrote {len(samples)} kernel samples to {args.out}")
    return 0


def cmd_convergence(args) -> int:
    from convergence import convergence_study
    from run_config import load_config

    config = load_config(args.config)
    report = convergence_study(config, args.levels, args.observable)
    text = json.dumps(_jsonable(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)
    return 0


def cmd_contrast(args) -> int:
    from cross_scheme import target_contrast
    from run_config import load_config

    config = load_config(args.config)
    report = target_contrast(config.profile(), config.grid(), config.kappa, config.evolve_config(), args.targets)
    print(json.dumps(_jsonable(report)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ewm", description='Simulate the 2+1 equivariant Einstein-wave map system.')
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Logging level (default: INFO)')
    sub = parser.add_subparsers(dest='command', required=True)

    init = sub.add_parser('init', help='Build initial data and write the initial dump')
    init.add_argument('config', help='Path to the JSON run configuration')
    init.add_argument('--scheme', choices=['polar', 'null'], default=None, help='Override the configured scheme')
    init.add_argument('--out-dir', default=None, help='Output directory (default: output.dir)')

    evolve = sub.add_parser('evolve', help='Evolve and write diag.csv plus field dumps')
    evolve.add_argument('config', help='Path to the JSON run configuration')
    evolve.add_argument('--scheme', choices=['polar', 'null'], default=None, help='Override the configured scheme')
    evolve.add_argument('--out-dir', default=None, help='Output directory (default: output.dir)')

    diagnose = sub.add_parser('diagnose', help='Recompute diagnostics from a polar field dump')
    diagnose.add_argument('dump', help='Path to a field dump')
    diagnose.add_argument('--r-ball', type=float, default=None, help='Radius of the E_ball diagnostic (default: r_max/2)')

    kernels = sub.add_parser('kernels', help='Tabulate the representation kernels K and J')
    kernels.add_argument('--mu-min', type=float, default=-1.0)
    kernels.add_argument('--mu-max', type=float, default=2.0)
    kernels.add_argument('--samples', type=int, default=16)
    kernels.add_argument('--out', default='kernels.csv', help='Output CSV (default: kernels.csv)')

    convergence = sub.add_parser('convergence', help='Measure the convergence order of an observable')
    convergence.add_argument('config', help='Path to the JSON run configuration')
    convergence.add_argument('--levels', type=int, default=3)
    convergence.add_argument('--observable', default='E_drift')
    convergence.add_argument('--out', default=None, help='Also write the JSON report here')
    contrast = sub.add_parser('contrast', help='Evolve one datum on several targets and compare max |Phi| growth')
    contrast.add_argument('config', help='Path to the JSON run configuration')
    contrast.add_argument('--targets', nargs='+', default=['hyperbolic', 'sphere'],
                          choices=['flat', 'hyperbolic', 'sphere'])
    return parser


COMMANDS = {
    "init": cmd_init,
    "evolve": cmd_evolve,
    "diagnose": cmd_diagnose,
    "kernels": cmd_kernels,
    "convergence": cmd_convergence,
    "contrast": cmd_contrast,
}


def run_command(argv: Optional[List[str]] = None) -> int:
    """Dispatch a subcommand; 0 on success, 1 for configuration errors, 2 for numerical failures."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    logging.getLogger().setLevel(args.log_level)
    logger.debug(f"Parsed args: {args}")

    try:
        return COMMANDS[args.command](args)
    except EwmException as e:
        logger.error(f"A critical error occurred: {e.reason}")
        if e.detail:
            logger.error(f"Details: {e.detail}")
        sys.stderr.write(json.dumps({"error": e.name, "reason": e.reason, "detail": e.detail}) + "\n")
        return e.exit_code


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
