"""
Monitored quantities of a run: energies, mass profiles, backward light cones
with their energies and fluxes, multiplier identities and the per-slice
DiagRecord stream written to diag.csv
"""
import math
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.interpolate import CubicSpline

from config import CSV_FORMAT, DEFAULT_LAMBDA_PRIME
from exceptions import ConeOutsideGrid, DomainError
from evolve_polar import momentum_residual, regularity_monitor
from initdata import PolarState, energy_densities, energy_profile, rotational_density
from target import grillakis_margin

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

DIAG_COLUMNS = ("t", "E_total", "E_ball", "m_max", "one_minus_kE_min", "mom_residual",
                "N_monitor", "phi_max", "w_axis")


class DiagRecord:
    """Diagnostics of one output slice. E_cone and flux_PT_cum stay nan until a cone is attached."""

    def __init__(self, t, E_total, E_ball, m_max, one_minus_kE_min, mom_residual, N_monitor,
                 grillakis_min_margin, phi_max, w_axis, E_cone=math.nan, flux_PT_cum=math.nan):
        self.t = float(t)
        self.E_total = float(E_total)
        self.E_ball = float(E_ball)
        self.E_cone = float(E_cone)
        self.m_max = float(m_max)
        self.one_minus_kE_min = float(one_minus_kE_min)
        self.flux_PT_cum = float(flux_PT_cum)
        self.mom_residual = float(mom_residual)
        self.N_monitor = float(N_monitor)
        self.grillakis_min_margin = float(grillakis_min_margin)
        self.phi_max = float(phi_max)
        self.w_axis = float(w_axis)

    def as_row(self) -> List[float]:
        return [getattr(self, column) for column in DIAG_COLUMNS]

    def to_dict(self) -> Dict[str, float]:
        return dict(vars(self))

    def __repr__(self):
        return f"DiagRecord(t={self.t}, E_total={self.E_total:.10g}, N_monitor={self.N_monitor:.6g})"


class ConeGeometry:
    """Backward light cone from the axis point at vertex_time.

    times ascend to vertex_time; r2[k] is the cone radius at times[k], r2[-1] = 0.
    """

    def __init__(self, vertex_time: float, times, r2, lambda_prime: float = DEFAULT_LAMBDA_PRIME):
        if not 0.0 < lambda_prime < 1.0:
            raise DomainError("Interior cone slope must lie in (0, 1).", f"lambda_prime={lambda_prime}")
        self.vertex_time = float(vertex_time)
        self.times = np.asarray(times, dtype=float)
        self.r2 = np.asarray(r2, dtype=float)
        self.lambda_prime = float(lambda_prime)
        self._spline = None

    def radius(self, t: float) -> float:
        if t < self.times[0] - 1e-12 or t > self.vertex_time + 1e-12:
            raise DomainError("Time outside the cone.", f"t={t}, cone spans [{self.times[0]}, {self.vertex_time}]")
        return float(np.interp(t, self.times, self.r2))

    def velocity(self, t: float) -> float:
        """d r2/dt from a cubic spline through the cone samples."""
        if self._spline is None:
            self._spline = CubicSpline(self.times, self.r2)
        return float(self._spline(t, 1))

    def interior_radius(self, t: float) -> float:
        return self.lambda_prime * (self.vertex_time - t)

    def __repr__(self):
        return f"ConeGeometry(vertex_time={self.vertex_time}, samples={len(self.times)})"


def mass_profile(state) -> np.ndarray:
    """Hawking-type mass: 1 - e^(-2 beta) on a polar slice, 1 + 4 Omega^-2 nu lambda on a null grid."""
    if isinstance(state, PolarState):
        return -np.expm1(-2.0 * state.beta)
    return 1.0 + 4.0 * np.exp(-2.0 * state.logOmega) * state.nu * state.lam


def _integral_to(r: np.ndarray, integrand: np.ndarray, r_stop: float) -> float:
    """int_0^r_stop of a grid function through its cubic spline; r_stop need not be a node."""
    return float(CubicSpline(r, integrand).integrate(0.0, r_stop))


def _value_at(r: np.ndarray, values: np.ndarray, r_stop: float) -> float:
    return float(CubicSpline(r, values)(r_stop))


def _energy_density_r(state: PolarState) -> np.ndarray:
    e, _ = energy_densities(state)
    return TWO_PI * e * state.grid.r * np.exp(state.beta)


def _slice_at(slices: Sequence[PolarState], t: float) -> PolarState:
    times = np.array([s.t for s in slices])
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise DomainError("No stored slice at the requested time.", f"t={t}, nearest {times[k]}")
    return slices[k]


def _speed(state: PolarState, r: float) -> float:
    return float(np.interp(r, state.grid.r, np.exp(state.alpha - state.beta)))


def cone_boundary(slices: Sequence[PolarState], vertex_time: float,
                  lambda_prime: float = DEFAULT_LAMBDA_PRIME) -> ConeGeometry:
    """Integrate dr/dt = -e^(alpha-beta) backwards from (vertex_time, 0) with Heun's method.

    The speed between stored slices is interpolated linearly in time.
    """
    slices = sorted(slices, key=lambda s: s.t)
    if vertex_time > slices[-1].t + 1e-12 or vertex_time <= slices[0].t:
        raise DomainError("Cone vertex outside the stored run.",
                          f"vertex_time={vertex_time}, run spans [{slices[0].t}, {slices[-1].t}]")

    def speed(t, r):
        times = [s.t for s in slices]
        k = int(np.searchsorted(times, t))
        if k < len(slices) and abs(slices[k].t - t) <= 1e-12:
            return _speed(slices[k], r)
        lo, hi = slices[k - 1], slices[min(k, len(slices) - 1)]
        if hi.t == lo.t:
            return _speed(lo, r)
        theta = (t - lo.t) / (hi.t - lo.t)
        return (1.0 - theta) * _speed(lo, r) + theta * _speed(hi, r)

    earlier = [s.t for s in slices if s.t < vertex_time - 1e-12]
    times = [vertex_time]
    radii = [0.0]
    r_max = slices[0].grid.r_max
    for t_next in reversed(earlier):
        t_cur, r_cur = times[-1], radii[-1]
        dt = t_cur - t_next
        k1 = speed(t_cur, r_cur)
        predictor = r_cur + dt * k1
        if predictor > r_max:
            raise ConeOutsideGrid("Backward cone leaves the radial grid.", f"t={t_next}, r2>{r_max}")
        r_new = r_cur + 0.5 * dt * (k1 + speed(t_next, predictor))
        if r_new > r_max:
            raise ConeOutsideGrid("Backward cone leaves the radial grid.", f"t={t_next}, r2={r_new:.6g} > {r_max}")
        times.append(t_next)
        radii.append(r_new)

    cone = ConeGeometry(vertex_time, times[::-1], radii[::-1], lambda_prime)
    logger.debug(f"Built {cone!r}; r2 at t={cone.times[0]:.6g} is {cone.r2[0]:.6g}")
    return cone


def cone_energy(slices: Sequence[PolarState], cone: ConeGeometry, t: float) -> float:
    """E^O(t) = 2 pi int_0^r2(t) e r e^beta dr, integrated through a cubic spline of the density."""
    state = _slice_at(slices, t)
    r2 = cone.radius(state.t)
    if r2 > state.grid.r_max:
        raise ConeOutsideGrid("Cone radius exceeds the grid.", f"t={t}, r2={r2:.6g}")
    return _integral_to(state.grid.r, _energy_density_r(state), r2)


def interior_cone_energy(slices: Sequence[PolarState], cone: ConeGeometry, t: float) -> float:
    """Energy inside the narrower cone r <= lambda' (t_O - t)."""
    state = _slice_at(slices, t)
    radius = cone.interior_radius(state.t)
    if radius > state.grid.r_max:
        raise ConeOutsideGrid("Interior cone radius exceeds the grid.", f"t={t}, radius={radius:.6g}")
    return _integral_to(state.grid.r, _energy_density_r(state), radius)


def _window(slices: Sequence[PolarState], cone: ConeGeometry, t1: float, t2: float) -> List[PolarState]:
    if not t1 < t2 <= cone.vertex_time + 1e-12:
        raise DomainError("Flux window must satisfy t1 < t2 <= t_O.", f"t1={t1}, t2={t2}, t_O={cone.vertex_time}")
    lo, hi = _slice_at(slices, t1).t, _slice_at(slices, t2).t
    return sorted((s for s in slices if lo <= s.t <= hi), key=lambda s: s.t)


def flux_PT(slices: Sequence[PolarState], cone: ConeGeometry, t1: float, t2: float) -> float:
    """Flux of P_T through the cone mantle as E^O(t2) - E^O(t1); non-positive in the continuum."""
    return cone_energy(slices, cone, t2) - cone_energy(slices, cone, t1)


def flux_PT_mantle(slices: Sequence[PolarState], cone: ConeGeometry, t1: float, t2: float) -> float:
    """The same flux by quadrature along the mantle: 2 pi int r (e^alpha m + r2' e^beta e)|_r2 dt.

    r2' is the velocity of the sampled cone curve; on an exact null mantle it equals
    -e^(alpha-beta) and the integrand reduces to r e^alpha (m - e).
    """
    window = _window(slices, cone, t1, t2)
    values = []
    for state in window:
        e, m = energy_densities(state)
        r2 = cone.radius(state.t)
        r = state.grid.r
        outflow = _value_at(r, np.exp(state.alpha) * m, r2)
        carried = cone.velocity(state.t) * _value_at(r, np.exp(state.beta) * e, r2)
        values.append(TWO_PI * r2 * (outflow + carried))
    return float(simpson(values, x=[s.t for s in window]))


def multiplier_R1_residual(slices: Sequence[PolarState], cone: ConeGeometry, t1: float, t2: float) -> float:
    """Normalized residual of the r-momentum multiplier identity on the truncated cone.

    2 pi int int r a Pi^2 dr dt = -S(t2) + S(t1) + flux, with a = e^(alpha-beta),
    S(t) = 2 pi int_0^r2 r^2 Pi Phi dr and the mantle flux
    2 pi int [r^2 a (Pi^2+Phi^2)/2 - e^(alpha+beta) g(phi)^2/2 + r2' r^2 Pi Phi]_r2 dt,
    r2' being the velocity of the sampled cone curve (-a on an exact null mantle).
    """
    window = _window(slices, cone, t1, t2)
    times = [s.t for s in window]
    bulk, mantle = [], []
    for state in window:
        r = state.grid.r
        a = np.exp(state.alpha - state.beta)
        r2 = cone.radius(state.t)
        bulk.append(TWO_PI * _integral_to(r, r * a * np.square(state.Pi), r2))
        g2 = np.square(np.asarray(state.target.g(state.phi)))
        edge = (0.5 * r * r * a * (np.square(state.Pi) + np.square(state.Phi))
                - 0.5 * np.exp(state.alpha + state.beta) * g2
                + cone.velocity(state.t) * r * r * state.Pi * state.Phi)
        mantle.append(TWO_PI * _value_at(r, edge, r2))

    def momentum(state):
        return TWO_PI * _integral_to(state.grid.r, np.square(state.grid.r) * state.Pi * state.Phi,
                                     cone.radius(state.t))

    lhs = float(simpson(bulk, x=times))
    s1, s2 = momentum(window[0]), momentum(window[-1])
    flux = float(simpson(mantle, x=times))
    scale = max(abs(lhs), abs(s1), abs(s2), abs(flux))
    if scale == 0.0:
        return 0.0
    return abs(lhs - (-s2 + s1 + flux)) / scale


def metric_bounds(state: PolarState, E0: float) -> Dict:
    """0 <= beta <= beta_inf with e^(-beta_inf) = 1 - kappa E0/2 pi, and the range of alpha."""
    deficit = 1.0 - state.kappa * E0 / TWO_PI
    beta_inf = math.inf if deficit <= 0.0 else -math.log(deficit)
    return {
        "beta_min": float(np.min(state.beta)),
        "beta_max": float(np.max(state.beta)),
        "beta_inf": beta_inf,
        "alpha_min": float(np.min(state.alpha)),
        "alpha_max": float(np.max(state.alpha)),
    }


def wp_bound(state: PolarState) -> Dict:
    """|wp(phi)| against sqrt(E_f E_Phi), the rotational and radial energy integrals."""
    r = state.grid.r
    weight = r * np.exp(state.beta)
    E_f = float(trapezoid(rotational_density(state) * weight, r))
    E_Phi = float(trapezoid(np.exp(-2.0 * state.beta) * np.square(state.Phi) * weight, r))
    wp_max = float(np.max(np.abs(state.target.wp(state.phi))))
    return {"wp_max": wp_max, "bound": math.sqrt(E_f * E_Phi), "E_f": E_f, "E_Phi": E_Phi}


def _grillakis_min(state: PolarState) -> float:
    amplitude = np.abs(state.phi)
    amplitude = amplitude[amplitude > 0.0]
    if amplitude.size == 0:
        return 0.0
    return float(np.min(grillakis_margin(state.target, amplitude)))


def record_diagnostics(state: PolarState, prev: Optional[PolarState] = None, dt: Optional[float] = None,
                       r_ball: Optional[float] = None) -> DiagRecord:
    """Diagnostics of one slice; mom_residual is nan without a previous slice."""
    profile = energy_profile(state)
    E_total = float(profile[-1])
    ball = state.grid.r_max / 2.0 if r_ball is None else min(r_ball, state.grid.r_max)
    residual = momentum_residual(state, prev, dt) if prev is not None and dt else math.nan
    return DiagRecord(
        t=state.t,
        E_total=E_total,
        E_ball=float(np.interp(ball, state.grid.r, profile)),
        m_max=float(np.max(mass_profile(state))),
        one_minus_kE_min=float(np.min(1.0 - state.kappa * profile / TWO_PI)),
        mom_residual=residual,
        N_monitor=regularity_monitor(state),
        grillakis_min_margin=_grillakis_min(state),
        phi_max=float(np.max(np.abs(state.phi))),
        w_axis=float(state.Phi[0]),
    )


def attach_cone_energies(records: Sequence[DiagRecord], slices: Sequence[PolarState], cone: ConeGeometry):
    """Fill E_cone and the cumulative P_T flux for records inside the cone's time span."""
    first = None
    for record in records:
        if record.t < cone.times[0] - 1e-12 or record.t > cone.vertex_time + 1e-12:
            continue
        record.E_cone = cone_energy(slices, cone, record.t)
        if first is None:
            first = record.E_cone
        record.flux_PT_cum = record.E_cone - first
    return records


class DiagnosticsSink:
    """Collects a DiagRecord for every observed slice, keeping the slices for cone diagnostics."""

    def __init__(self, r_ball: Optional[float] = None, keep_slices: bool = True):
        self.r_ball = r_ball
        self.keep_slices = keep_slices
        self.records: List[DiagRecord] = []
        self.slices: List[PolarState] = []

    def observe(self, state: PolarState, prev: Optional[PolarState], dt: Optional[float]):
        record = record_diagnostics(state, prev, dt, self.r_ball)
        self.records.append(record)
        if self.keep_slices:
            self.slices.append(state)
        logger.debug(f"Recorded {record!r}")
        return record


def write_diag_csv(records: Sequence[DiagRecord], path: str):
    rows = np.array([record.as_row() for record in records], dtype=float).reshape(-1, len(DIAG_COLUMNS))
    np.savetxt(path, rows, fmt=CSV_FORMAT, delimiter=",", header=",".join(DIAG_COLUMNS), comments="")
    logger.info(f"Wrote {len(records)} diagnostic rows to {path}")


def null_regularity_monitor(state, axis_gap: float = 0.0) -> float:
    """Sup over nodes with u_bar - u >= axis_gap of |phi|, |phi|/r, |d phi|, e^|log Omega|, 1/lambda, 1/|nu|."""
    grid = state.grid
    mask = np.isfinite(state.r) & (grid.separation >= max(axis_gap, 0.5 * grid.h))
    if not np.any(mask):
        return 1.0
    r = state.r[mask]
    quantities = (
        np.abs(state.phi[mask]),
        np.abs(state.phi[mask]) / r,
        np.abs(state.Theta[mask]) / r,
        np.abs(state.Xi[mask]) / r,
        np.exp(np.abs(state.logOmega[mask])),
        1.0 / np.abs(state.lam[mask]),
        1.0 / np.abs(state.nu[mask]),
    )
    return float(max(np.max(q) for q in quantities))
