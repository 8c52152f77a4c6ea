"""
Comparisons between runs: the polar and the double-null schemes on the same
physical data, and one datum evolved on two different targets
"""
import logging
from typing import Dict, List, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from diagnostics import mass_profile
from evolve_null import NullGrid, axis_w, init_from_cone_samples, run_null
from evolve_polar import EvolveConfig, evolve_run
from exceptions import DomainError, NumericalException
from initdata import DataProfile, PolarState, RadialGrid, build_initial_state
from target import TargetGeometry, build_target

logger = logging.getLogger(__name__)


def _polar_history(profile: DataProfile, grid: RadialGrid, kappa: float, target: TargetGeometry,
                   cfg: EvolveConfig) -> List[PolarState]:
    state0 = build_initial_state(profile, grid, kappa, target)
    history = [state0]
    evolve_run(state0, cfg, on_step=history.append)
    return history


def flat_cross_check(profile: DataProfile, target: TargetGeometry, h: float, u_bar_max: float,
                     dissipation_eps: float = 0.0) -> Dict:
    """kappa = 0: null node (i, j) sits at t = (i+j) h/2, r = (j-i) h/2.

    The polar run uses dr = h/2 and cfl = 1/2, so the node is slice 2(i+j), radius index j-i.
    The outer boundary is placed beyond u_bar_max so that no node sees it.
    """
    null_grid = NullGrid.from_extent(u_bar_max, h)
    dr = 0.5 * h
    n_r = int(np.ceil((null_grid.u_bar[-1] + 2.0) / dr))
    grid = RadialGrid(n_r, dr)
    cfg = EvolveConfig(t_end=null_grid.u_bar[-1], cfl=0.5, dissipation_eps=dissipation_eps, boundary="outgoing")
    history = _polar_history(profile, grid, 0.0, target, cfg)

    n = null_grid.n
    cone = np.array([history[2 * j].phi[j] for j in range(n + 1)])
    null = run_null(init_from_cone_samples(null_grid, null_grid.u_bar, cone, 0.0, target)).state

    i, j = np.nonzero(null_grid.domain)
    polar_phi = np.array([history[2 * (a + b)].phi[b - a] for a, b in zip(i, j)])
    error = np.abs(null.phi[i, j] - polar_phi)
    report = {"h": h, "max_error": float(np.max(error)), "nodes": int(error.size)}
    logger.info(f"Flat cross-check at h={h}: max |phi_null - phi_polar| = {report['max_error']:.3e}")
    return report


def _outgoing_ray(history: List[PolarState]):
    """Heun integration of dr/dt = e^(alpha-beta) from the axis at t = 0 through the stored slices."""
    t = [history[0].t]
    r = [0.0]
    for prev, state in zip(history[:-1], history[1:]):
        dt = state.t - prev.t
        k1 = float(np.interp(r[-1], prev.grid.r, np.exp(prev.alpha - prev.beta)))
        guess = r[-1] + dt * k1
        if guess > state.grid.r_max:
            break
        k2 = float(np.interp(guess, state.grid.r, np.exp(state.alpha - state.beta)))
        t.append(state.t)
        r.append(r[-1] + 0.5 * dt * (k1 + k2))
    return np.array(t), np.array(r)


def _cone_along_ray(history: List[PolarState], kappa: float, u_bar_max: float) -> Dict[str, np.ndarray]:
    """Null cone data read off the polar run along its outgoing ray from the origin.

    With Omega = 1 on the cone, lambda(r) = exp(-kappa int r psi_r^2 dr)/2 and u_bar = int dr/lambda.
    The polar mass 1 - e^(-2 beta) is sampled at the same spacetime points.
    """
    t_ray, r_ray = _outgoing_ray(history)
    psi = np.array([np.interp(x, s.grid.r, s.phi) for x, s in zip(r_ray, history)])
    mass = np.array([-np.expm1(-2.0 * np.interp(x, s.grid.r, s.beta)) for x, s in zip(r_ray, history)])
    keep = np.concatenate(([True], np.diff(r_ray) > 0.0))
    r_ray, psi, mass = r_ray[keep], psi[keep], mass[keep]
    psi_r = np.gradient(psi, r_ray, edge_order=2)
    lam = 0.5 * np.exp(-kappa * cumulative_trapezoid(r_ray * np.square(psi_r), r_ray, initial=0.0))
    u_bar = cumulative_trapezoid(1.0 / lam, r_ray, initial=0.0)
    if u_bar[-1] < u_bar_max:
        raise DomainError("Outgoing ray left the polar grid before reaching u_bar_max.",
                          f"reached u_bar={u_bar[-1]:.6g} < {u_bar_max}")
    return {"u_bar": u_bar, "psi": psi, "r": r_ray, "mass": mass}


def _paired_runs(profile: DataProfile, target: TargetGeometry, kappa: float, h: float, u_bar_max: float,
                 dr: Optional[float], dissipation_eps: float):
    dr = dr or 0.5 * h
    n_r = int(np.ceil((u_bar_max + 2.0) / dr))
    grid = RadialGrid(n_r, dr)
    cfg = EvolveConfig(t_end=u_bar_max, cfl=0.5, dissipation_eps=dissipation_eps, boundary="outgoing")
    history = _polar_history(profile, grid, kappa, target, cfg)
    ray = _cone_along_ray(history, kappa, u_bar_max)

    null_grid = NullGrid.from_extent(u_bar_max, h)
    cone = CubicSpline(ray["u_bar"], ray["psi"])(null_grid.u_bar)
    null = run_null(init_from_cone_samples(null_grid, null_grid.u_bar, cone, kappa, target)).state
    return history, ray, null


def gauge_invariant_cross_check(profile: DataProfile, target: TargetGeometry, kappa: float, h: float,
                                u_bar_max: float, dr: Optional[float] = None,
                                dissipation_eps: float = 0.0) -> Dict:
    """Axis w against proper time along the axis: t in the polar gauge, int Omega du in the null gauge."""
    history, _, null = _paired_runs(profile, target, kappa, h, u_bar_max, dr, dissipation_eps)
    tau, w_null = axis_w(null)
    times = np.array([s.t for s in history])
    w_polar = np.interp(tau, times, np.array([s.Phi[0] for s in history]))
    report = {"h": h, "tau": tau, "w_null": w_null, "w_polar": w_polar,
              "max_error": float(np.max(np.abs(w_null - w_polar)))}
    logger.info(f"Axis cross-check at h={h}, kappa={kappa}: max |w_null - w_polar| = {report['max_error']:.3e}")
    return report


def mass_cross_check(profile: DataProfile, target: TargetGeometry, kappa: float, h: float,
                     u_bar_max: float, dr: Optional[float] = None, dissipation_eps: float = 0.0) -> Dict:
    """1 + 4 Omega^-2 nu lambda on the null scheme's initial cone against 1 - e^(-2 beta) at the same radii."""
    _, ray, null = _paired_runs(profile, target, kappa, h, u_bar_max, dr, dissipation_eps)
    r_cone = null.r[0, 1:]
    m_null = mass_profile(null)[0, 1:]
    m_polar = np.interp(r_cone, ray["r"], ray["mass"])
    report = {"h": h, "r": r_cone, "m_null": m_null, "m_polar": m_polar,
              "m_max": float(np.max(m_polar)),
              "max_error": float(np.max(np.abs(m_null - m_polar)))}
    logger.info(f"Mass cross-check at h={h}, kappa={kappa}: max |m_null - m_polar| = {report['max_error']:.3e}")
    return report


def target_contrast(profile: DataProfile, grid: RadialGrid, kappa: float, cfg: EvolveConfig,
                    kinds=("hyperbolic", "sphere")) -> Dict:
    """Evolve one datum on each target kind and report how far max |Phi| grows.

    Numerical breakdown of a run is reported, not raised.
    """
    report = {}
    for kind in kinds:
        target = build_target({"kind": kind})
        peaks = []
        entry = {"halted": False, "halt_reason": None, "failed": None}
        try:
            state0 = build_initial_state(profile, grid, kappa, target)
            peaks.append(float(np.max(np.abs(state0.Phi))))
            result = evolve_run(state0, cfg, on_step=lambda s: peaks.append(float(np.max(np.abs(s.Phi)))))
            entry.update(halted=result.halted, halt_reason=result.halt_reason, t=result.state.t)
        except NumericalException as e:
            entry["failed"] = e.name
            logger.warning(f"Run on the {kind} target stopped: {e.reason}")
        if peaks:
            entry.update(Phi_max0=peaks[0], Phi_max=max(peaks), growth=max(peaks) / max(peaks[0], 1e-300))
        report[kind] = entry
    logger.info("Target contrast: " + ", ".join(f"{k}: growth {v.get('growth', float('nan')):.3g}"
                                                  for k, v in report.items()))
    return report
