"""
Constrained evolution of (phi, Phi, Pi) in polar-areal gauge.

Method of lines with classical RK4 and fourth-order centered differences;
alpha and beta are re-solved from the radial constraints at every stage.
Near the axis the singular 1/r terms are evaluated through w = phi/r.
"""
import math
import logging
from typing import Callable, List, Optional

import numpy as np
from scipy.integrate import trapezoid

from config import (DEFAULT_BOUNDARY, DEFAULT_CFL, DEFAULT_DISSIPATION_EPS, DEFAULT_MONITOR_THRESHOLD,
                    DEFAULT_OUTPUT_EVERY, DT_FLOOR)
from exceptions import CflViolation, NonFiniteField, Stalled, SupercriticalEnergy, ValidationError
from initdata import PolarState, check_subcriticality, energy_profile, solve_metric_slice

logger = logging.getLogger(__name__)

BOUNDARIES = ("outgoing", "frozen", "exact")
TWO_PI = 2.0 * math.pi


class EvolveConfig:
    def __init__(self, t_end=1.0, cfl=DEFAULT_CFL, dissipation_eps=DEFAULT_DISSIPATION_EPS,
                 output_every=DEFAULT_OUTPUT_EVERY, boundary=DEFAULT_BOUNDARY,
                 monitor_threshold=DEFAULT_MONITOR_THRESHOLD, exact=None):
        violations = []
        if not 0.0 < cfl <= 1.0:
            violations.append(f"evolve.cfl must lie in (0, 1], got {cfl}")
        if not t_end >= 0.0:
            violations.append(f"evolve.t_end must be >= 0, got {t_end}")
        if not dissipation_eps >= 0.0:
            violations.append(f"evolve.dissipation_eps must be >= 0, got {dissipation_eps}")
        if int(output_every) < 1:
            violations.append(f"evolve.output_every must be >= 1, got {output_every}")
        if boundary not in BOUNDARIES:
            violations.append(f"evolve.boundary must be one of {', '.join(BOUNDARIES)}, got {boundary!r}")
        if boundary == "exact" and exact is None:
            violations.append("evolve.boundary 'exact' needs an exact solution")
        if violations:
            raise ValidationError("Invalid evolution settings.", violations)
        self.t_end = float(t_end)
        self.cfl = float(cfl)
        self.dissipation_eps = float(dissipation_eps)
        self.output_every = int(output_every)
        self.boundary = boundary
        self.monitor_threshold = float(monitor_threshold)
        # object with equivariant_fields(t, r) -> {phi, Phi, Pi, dphi, dPhi, dPi}
        self.exact = exact

    def __repr__(self):
        return (f"EvolveConfig(t_end={self.t_end}, cfl={self.cfl}, dissipation_eps={self.dissipation_eps}, "
                f"boundary={self.boundary!r}, output_every={self.output_every})")


class EvolveResult:
    def __init__(self, state: PolarState, records: List, steps: int, halted: bool = False,
                 halt_reason: Optional[str] = None):
        self.state = state
        self.records = records
        self.steps = steps
        self.halted = halted
        self.halt_reason = halt_reason


def _derivative(x: np.ndarray, dr: float, parity: int) -> np.ndarray:
    """d/dr, fourth-order centered up to n-2 with parity ghosts at the axis.

    Node n-1 falls back to the second-order centered stencil and node n to the one-sided one.
    """
    sign = 1.0 if parity > 0 else -1.0
    ext = np.concatenate((sign * x[2:0:-1], x))  # ext[k] = x[k-2]
    n = len(x) - 1
    out = np.empty_like(x)
    out[:n - 1] = (ext[0:n - 1] - 8.0 * ext[1:n] + 8.0 * ext[3:n + 2] - ext[4:n + 3]) / (12.0 * dr)
    out[n - 1] = (x[n] - x[n - 2]) / (2.0 * dr)
    out[n] = (3.0 * x[n] - 4.0 * x[n - 1] + x[n - 2]) / (2.0 * dr)
    if parity > 0:
        out[0] = 0.0
    return out


def spatial_rhs(state: PolarState):
    """Semi-discrete right-hand side (dphi, dPhi, dPi) for a slice with solved metric.

    dPi = (1/r) d_r(r a Phi) - e^(alpha+beta) f(phi)/r^2 with a = e^(alpha-beta),
    regrouped as d_r(a Phi) + a d_r w - a w (e^(2 beta)-1)/r - a e^(2 beta) r w^3 zeta_rem(phi).
    """
    r = state.grid.r
    dr = state.grid.dr
    a = np.exp(state.alpha - state.beta)
    w = state.w()

    a_Pi = a * state.Pi
    dphi = a_Pi.copy()
    dPhi = _derivative(a_Pi, dr, parity=-1)

    e2b = np.exp(2.0 * state.beta)
    metric_over_r = np.zeros_like(r)
    metric_over_r[1:] = np.expm1(2.0 * state.beta[1:]) / r[1:]
    zeta = np.asarray(state.target.zeta_rem(state.phi))
    dPi = (_derivative(a * state.Phi, dr, parity=1)
           + a * _derivative(w, dr, parity=1)
           - a * w * metric_over_r
           - a * e2b * r * w ** 3 * zeta)
    dphi[0] = 0.0
    dPi[0] = 0.0

    for name, values in (("dphi", dphi), ("dPhi", dPhi), ("dPi", dPi)):
        if not np.all(np.isfinite(values)):
            raise NonFiniteField(f"Right-hand side {name} is not finite.", f"t={state.t}")
    return dphi, dPhi, dPi


def kreiss_oliger(x: np.ndarray, dr: float, eps: float, parity: int) -> np.ndarray:
    """-(eps/(16 dr)) delta^4 x on i = 0..n-2 with parity ghosts at the axis."""
    out = np.zeros_like(x)
    if eps == 0.0:
        return out
    sign = 1.0 if parity > 0 else -1.0
    ext = np.concatenate((sign * x[2:0:-1], x))  # ext[k] = x[k-2]
    n = len(x) - 1
    d4 = ext[0:n - 1] - 4.0 * ext[1:n] + 6.0 * ext[2:n + 1] - 4.0 * ext[3:n + 2] + ext[4:n + 3]
    out[:n - 1] = -eps / (16.0 * dr) * d4
    return out


def _apply_boundary(state: PolarState, rhs, cfg: EvolveConfig):
    dphi, dPhi, dPi = rhs
    if cfg.boundary == "frozen":
        dphi[-1] = dPhi[-1] = dPi[-1] = 0.0
    elif cfg.boundary == "exact":
        exact = cfg.exact.equivariant_fields(state.t, state.grid.r[-1:])
        dphi[-1] = exact["dphi"][0]
        dPhi[-1] = exact["dPhi"][0]
        dPi[-1] = exact["dPi"][0]
    else:
        # Pi - Phi leaves the grid and keeps its one-sided interior rate; the incoming
        # Pi + Phi is slaved to -phi/(2r), which is d_t phi = -a (d_r phi + phi/(2r)).
        r_b = state.grid.r[-1]
        outgoing = dPi[-1] - dPhi[-1]
        incoming = -dphi[-1] / (2.0 * r_b)
        dPi[-1] = 0.5 * (incoming + outgoing)
        dPhi[-1] = 0.5 * (incoming - outgoing)
    return dphi, dPhi, dPi


def _stage_rhs(state: PolarState, cfg: EvolveConfig):
    dphi, dPhi, dPi = spatial_rhs(state)
    dr = state.grid.dr
    eps = cfg.dissipation_eps
    dphi += kreiss_oliger(state.phi, dr, eps, parity=-1)
    dPhi += kreiss_oliger(state.Phi, dr, eps, parity=1)
    dPi += kreiss_oliger(state.Pi, dr, eps, parity=-1)
    return _apply_boundary(state, (dphi, dPhi, dPi), cfg)


def max_stable_dt(state: PolarState, cfl: float) -> float:
    return cfl * state.grid.dr / float(np.max(np.exp(state.alpha - state.beta)))


def rk4_step(state: PolarState, dt: float, cfg: EvolveConfig) -> PolarState:
    """One classical RK4 step; the metric is re-solved at every stage."""
    limit = max_stable_dt(state, cfg.cfl)
    if dt > limit * (1.0 + 1e-12):
        raise CflViolation("Time step exceeds the CFL limit.", f"dt={dt:.6g} > {limit:.6g} at t={state.t}")

    def advance(base, k, h, t):
        s = base.with_fields(t, base.phi + h * k[0], base.Phi + h * k[1], base.Pi + h * k[2])
        solve_metric_slice(s)
        return s

    t0 = state.t
    k1 = _stage_rhs(state, cfg)
    s2 = advance(state, k1, 0.5 * dt, t0 + 0.5 * dt)
    k2 = _stage_rhs(s2, cfg)
    s3 = advance(state, k2, 0.5 * dt, t0 + 0.5 * dt)
    k3 = _stage_rhs(s3, cfg)
    s4 = advance(state, k3, dt, t0 + dt)
    k4 = _stage_rhs(s4, cfg)

    def combine(x, i):
        return x + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

    phi = combine(state.phi, 0)
    Pi = combine(state.Pi, 2)
    phi[0] = 0.0
    Pi[0] = 0.0
    new = state.with_fields(t0 + dt, phi, combine(state.Phi, 1), Pi)
    solve_metric_slice(new)
    return new


def momentum_residual(state: PolarState, state_prev: PolarState, dt: float) -> float:
    """L2 norm of (beta - beta_prev)/dt - r kappa a Pi Phi, the source taken at the midpoint."""
    def source(s):
        return s.grid.r * s.kappa * np.exp(s.alpha - s.beta) * s.Pi * s.Phi

    residual = (state.beta - state_prev.beta) / dt - 0.5 * (source(state) + source(state_prev))
    return float(math.sqrt(trapezoid(np.square(residual), state.grid.r)))


def regularity_monitor(state: PolarState) -> float:
    """Polar analogue of the extension-criterion norm; equals 1 in vacuum."""
    E = energy_profile(state)
    deficit = 1.0 - state.kappa * E / TWO_PI
    inverse_deficit = np.inf if np.any(deficit <= 0.0) else float(np.max(1.0 / deficit))
    return float(max(
        np.max(np.exp(np.abs(state.alpha))),
        np.max(np.exp(np.abs(state.beta))),
        np.max(np.abs(state.phi)),
        np.max(np.abs(state.Phi)),
        np.max(np.abs(state.Pi)),
        np.max(np.abs(state.w())),
        inverse_deficit,
    ))


def evolve_run(state0: PolarState, cfg: EvolveConfig, sink=None,
               on_step: Optional[Callable[[PolarState], None]] = None) -> EvolveResult:
    """Step to t_end, handing every output_every-th slice to the sink.

    The sink needs observe(state, prev_state, dt) and a records list.
    """
    report = check_subcriticality(state0)
    if not report["admissible"]:
        raise SupercriticalEnergy("Initial data are not subcritical.",
                                  f"kappa*E0/2pi = {report['kappa_E_over_2pi']:.6g}")
    logger.info(f"Evolving {state0!r} with {cfg!r}; E0={report['E0']:.10g}, m_inf={report['m_infinity']:.6g}")

    state = state0
    prev = None
    dt = 0.0
    steps = 0
    if sink is not None:
        sink.observe(state, None, None)

    halted, reason = False, None
    while state.t < cfg.t_end - 1e-12 * max(1.0, cfg.t_end):
        dt = min(max_stable_dt(state, cfg.cfl), cfg.t_end - state.t)
        if dt < DT_FLOOR:
            raise Stalled("Time step underflowed.", f"dt={dt:.3e} at t={state.t}")
        prev, state = state, rk4_step(state, dt, cfg)
        steps += 1
        if on_step is not None:
            on_step(state)

        monitor = regularity_monitor(state)
        at_end = state.t >= cfg.t_end - 1e-12 * max(1.0, cfg.t_end)
        if monitor > cfg.monitor_threshold:
            halted = True
            reason = f"regularity monitor {monitor:.3e} exceeded {cfg.monitor_threshold:.3e} at t={state.t:.6g}"
            logger.warning(f"Halting run: {reason}")
        if sink is not None and (steps % cfg.output_every == 0 or at_end or halted):
            sink.observe(state, prev, dt)
        if halted:
            break

    logger.info(f"Finished at t={state.t:.6g} after {steps} steps{' (halted)' if halted else ''}")
    records = list(sink.records) if sink is not None else []
    return EvolveResult(state, records, steps, halted, reason)
