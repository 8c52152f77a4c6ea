"""
Convergence-order harness: repeat a run at n, 2n, 4n, ... cells (dt tied to dr
through the CFL number) and measure the order of an observable
"""
import math
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Sequence

import numpy as np

from config import worker_count
from cross_scheme import flat_cross_check, gauge_invariant_cross_check
from diagnostics import (DiagnosticsSink, cone_boundary, flux_PT, flux_PT_mantle,
                         multiplier_R1_residual)
from evolve_null import init_characteristic_data, null_constraint_residuals, run_null
from evolve_polar import evolve_run
from exceptions import ValidationError
from initdata import build_initial_state, energy_profile
from run_config import RunConfig

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def observed_order(errors: Sequence[float]) -> List[float]:
    """p_k = log2(e_k / e_{k+1}) for errors that vanish in the continuum."""
    orders = []
    for coarse, fine in zip(errors[:-1], errors[1:]):
        orders.append(math.log2(coarse / fine) if coarse > 0.0 and fine > 0.0 else math.nan)
    return orders


def richardson_order(f1: float, f2: float, f3: float) -> float:
    """log2(|f1 - f2| / |f2 - f3|) from three successively halved resolutions."""
    upper, lower = abs(f1 - f2), abs(f2 - f3)
    if upper == 0.0 or lower == 0.0:
        return math.nan
    return math.log2(upper / lower)


def _polar_run(config: RunConfig, n: int, keep_slices: bool = False):
    grid = config.grid(n)
    state0 = build_initial_state(config.profile(), grid, config.kappa, config.target())
    sink = DiagnosticsSink(keep_slices=keep_slices)
    result = evolve_run(state0, config.evolve_config(), sink)
    return state0, result, sink


def _e_drift(config: RunConfig, n: int) -> float:
    state0, result, _ = _polar_run(config, n)
    E0 = float(energy_profile(state0)[-1])
    E1 = float(energy_profile(result.state)[-1])
    return abs(E1 - E0) / max(E0, 1e-300)


def _mom_residual(config: RunConfig, n: int) -> float:
    _, result, _ = _polar_run(config, n)
    values = [r.mom_residual for r in result.records if not math.isnan(r.mom_residual)]
    return max(values) if values else 0.0


def _field_error_vs_exact(config: RunConfig, n: int) -> float:
    """max |phi - phi_exact| and |Phi - Phi_exact| at t_end"""
    exact = config.exact_solution()
    if exact is None:
        raise ValidationError("field_error_vs_exact needs polynomial data.", ["data.kind must be 'poly'"])
    _, result, _ = _polar_run(config, n)
    state = result.state
    reference = exact.equivariant_fields(state.t, state.grid.r)
    return float(max(np.max(np.abs(state.phi - reference["phi"])), np.max(np.abs(state.Phi - reference["Phi"]))))


def _metric_identity(config: RunConfig, n: int) -> float:
    """max over outputs of max_r |e^-beta + kappa E(t,r)/2pi - 1|"""
    _, _, sink = _polar_run(config, n, keep_slices=True)
    worst = 0.0
    for state in sink.slices:
        identity = np.exp(-state.beta) + state.kappa * energy_profile(state) / TWO_PI - 1.0
        worst = max(worst, float(np.max(np.abs(identity))))
    return worst


def _cone_window(config: RunConfig, sink: DiagnosticsSink):
    t_end = sink.slices[-1].t
    vertex = config.cone["vertex_time"] or t_end
    cone = cone_boundary(sink.slices, vertex, config.cone["lambda_prime"])
    return cone, cone.times[0], vertex


def _r1_residual(config: RunConfig, n: int) -> float:
    _, _, sink = _polar_run(config, n, keep_slices=True)
    cone, t1, t2 = _cone_window(config, sink)
    return multiplier_R1_residual(sink.slices, cone, t1, t2)


def _flux_dual(config: RunConfig, n: int) -> float:
    """Gap between the two flux computations: energy difference against mantle quadrature."""
    _, _, sink = _polar_run(config, n, keep_slices=True)
    cone, t1, t2 = _cone_window(config, sink)
    return abs(flux_PT(sink.slices, cone, t1, t2) - flux_PT_mantle(sink.slices, cone, t1, t2))


def _null_constraints(config: RunConfig, n: int) -> float:
    base = config.null_grid()
    h = base.h * base.n / n
    grid = config.null_grid(h)
    state = init_characteristic_data(config.profile(), grid, config.kappa, config.target())
    residuals = null_constraint_residuals(run_null(state).state)
    return max(residuals.values())


def _cross_scheme_axis(config: RunConfig, n: int) -> float:
    base = config.null_grid()
    h = base.h * base.n / n
    u_bar_max = config.null["u_bar_max"]
    if config.kappa == 0.0:
        return flat_cross_check(config.profile(), config.target(), h, u_bar_max)["max_error"]
    return gauge_invariant_cross_check(config.profile(), config.target(), config.kappa, h, u_bar_max)["max_error"]


OBSERVABLES: Dict[str, Callable[[RunConfig, int], float]] = {
    "E_drift": _e_drift,
    "mom_residual": _mom_residual,
    "field_error_vs_exact": _field_error_vs_exact,
    "null_constraints": _null_constraints,
    "cross_scheme_axis": _cross_scheme_axis,
    "metric_identity": _metric_identity,
    "R1_residual": _r1_residual,
    "flux_dual": _flux_dual,
}


def convergence_study(config: RunConfig, levels: int = 3, observable: str = "E_drift") -> Dict:
    """Measure an error-type observable at n 2^k, k < levels; orders from consecutive ratios.

    The base n is grid.n for polar observables and u_bar_max/h for null ones.
    """
    if levels < 3:
        raise ValidationError("A convergence study needs at least three levels.", [f"levels must be >= 3, got {levels}"])
    if observable not in OBSERVABLES:
        raise ValidationError(f"Unknown observable '{observable}'.",
                              [f"observable must be one of {', '.join(OBSERVABLES)}"])
    measure = OBSERVABLES[observable]
    if observable in ("null_constraints", "cross_scheme_axis"):
        base = config.null_grid().n
    else:
        base = config.grid_spec["n"]
    sizes = [base * 2 ** k for k in range(levels)]

    with ThreadPoolExecutor(max_workers=worker_count(levels)) as pool:
        values = list(pool.map(lambda n: measure(config, n), sizes))

    report = {
        "observable": observable,
        "levels": sizes,
        "values": values,
        "orders": observed_order(values),
        "richardson_orders": [richardson_order(*values[k:k + 3]) for k in range(len(values) - 2)],
    }
    logger.info(f"Convergence of {observable}: values={values}, orders={report['orders']}")
    return report

