"""
Initial data on a radial grid: profiles, the polar-areal metric solve,
energies and the subcriticality (deficit angle) bound
"""
import math
import logging
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from config import (BETA_GUARD, DEFAULT_KAPPA, PHI_CONSISTENCY_STEP, PHI_CONSISTENCY_TOLERANCE, SUBCRITICAL_MARGIN,
                    SUPPORT_TOLERANCE)
from exceptions import DomainError, NonFiniteField, SupercriticalEnergy, SupportOverflow, ValidationError
from target import TargetGeometry, build_target

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
PROFILE_KINDS = ("centered", "shell", "custom-table", "poly")


class RadialGrid:
    """Uniform grid r_i = i*dr, i = 0..n"""

    def __init__(self, n: int, dr: float):
        if n < 4:
            raise ValidationError("Radial grid too coarse.", [f"grid.n must be >= 4, got {n}"])
        if not dr > 0:
            raise ValidationError("Radial grid spacing must be positive.", [f"dr={dr}"])
        self.n = int(n)
        self.dr = float(dr)
        self.r = self.dr * np.arange(self.n + 1, dtype=float)

    @classmethod
    def from_extent(cls, r_max: float, n: int) -> "RadialGrid":
        return cls(n, float(r_max) / int(n))

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def __repr__(self):
        return f"RadialGrid(n={self.n}, dr={self.dr})"


class DataProfile:
    """Initial data family.

    The kinetic datum is Pi = e^(beta-alpha) d_t phi itself, so the metric
    solve needs no iteration. With time_symmetric off, Pi is the fraction
    `ingoing` of the left-moving datum Phi - phi/r. A custom table with a
    third column gives Pi directly and overrides both settings.
    """

    def __init__(self, kind="centered", A=0.1, sigma=1.0, r0=0.0, time_symmetric=True,
                 ingoing=1.0, table=None, solution="quad", t0=0.0):
        if kind not in PROFILE_KINDS:
            raise ValidationError(f"Unknown data kind '{kind}'.",
                                  [f"data.kind must be one of {', '.join(PROFILE_KINDS)}"])
        self.kind = kind
        self.A = float(A)
        self.sigma = float(sigma)
        self.r0 = float(r0)
        self.time_symmetric = bool(time_symmetric)
        self.ingoing = float(ingoing)
        self.table = table
        self.solution = solution
        self.t0 = float(t0)

    def __repr__(self):
        return (f"DataProfile(kind={self.kind!r}, A={self.A}, sigma={self.sigma}, r0={self.r0}, "
                f"time_symmetric={self.time_symmetric})")


class PolarState:
    """One time slice in polar-areal gauge"""

    def __init__(self, t, grid: RadialGrid, phi, Phi, Pi, alpha=None, beta=None,
                 kappa=DEFAULT_KAPPA, target: Optional[TargetGeometry] = None):
        self.t = float(t)
        self.grid = grid
        self.phi = np.asarray(phi, dtype=float)
        self.Phi = np.asarray(Phi, dtype=float)
        self.Pi = np.asarray(Pi, dtype=float)
        self.alpha = np.zeros_like(self.phi) if alpha is None else np.asarray(alpha, dtype=float)
        self.beta = np.zeros_like(self.phi) if beta is None else np.asarray(beta, dtype=float)
        self.kappa = float(kappa)
        self.target = target if target is not None else build_target({"kind": "hyperbolic"})

    @property
    def r(self):
        return self.grid.r

    def with_fields(self, t, phi, Phi, Pi) -> "PolarState":
        """New state sharing grid, coupling and target; metric left for the caller to solve."""
        return PolarState(t, self.grid, phi, Phi, Pi, kappa=self.kappa, target=self.target)

    def copy(self) -> "PolarState":
        return PolarState(self.t, self.grid, self.phi.copy(), self.Phi.copy(), self.Pi.copy(),
                          self.alpha.copy(), self.beta.copy(), self.kappa, self.target)

    def w(self):
        """phi/r with its axis limit Phi(0)"""
        r = self.grid.r
        out = np.empty_like(self.phi)
        out[0] = self.Phi[0]
        out[1:] = self.phi[1:] / r[1:]
        return out

    def __repr__(self):
        return f"PolarState(t={self.t}, grid={self.grid!r}, kappa={self.kappa}, target={self.target.name!r})"


def profile_values(profile: DataProfile, r):
    """Sample (phi0, Phi0, Pi0) of a profile at radii r."""
    r = np.asarray(r, dtype=float)
    A, sigma = profile.A, profile.sigma

    if profile.kind == "poly":
        from flatwave import exact_poly_solution
        fields = exact_poly_solution(profile.solution).equivariant_fields(profile.t0, r)
        return fields["phi"], fields["Phi"], fields["Pi"]

    if profile.kind == "centered":
        envelope = np.exp(-np.square(r / sigma))
        phi0 = A * r * envelope
        Phi0 = A * envelope * (1.0 - 2.0 * np.square(r) / sigma ** 2)
    elif profile.kind == "shell":
        q = (np.square(r) - profile.r0 ** 2) / sigma ** 2
        envelope = np.exp(-np.square(q))
        phi0 = A * r * envelope
        Phi0 = A * envelope * (1.0 - 4.0 * np.square(r) * q / sigma ** 2)
    else:
        phi0, Phi0, Pi0 = _table_values(profile.table, r)
        if Pi0 is not None:
            return phi0, Phi0, Pi0

    if profile.time_symmetric:
        Pi0 = np.zeros_like(phi0)
    else:
        w = np.empty_like(phi0)
        small = r == 0.0
        w[small] = Phi0[small]
        w[~small] = phi0[~small] / r[~small]
        Pi0 = profile.ingoing * (Phi0 - w)
    return phi0, Phi0, Pi0


def _table_values(table: Optional[Sequence[Sequence[float]]], r):
    """Spline phi0 (and Pi0 when a third column is given) through [r, phi0, Pi0] rows, zero past the last row."""
    rows = np.asarray(table or [], dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 4 or rows.shape[1] < 2:
        raise ValidationError("Custom data table malformed.",
                              ["data.table must list at least four [r, phi0] rows"])
    if rows[0, 0] != 0.0 or rows[0, 1] != 0.0:
        raise ValidationError("Custom data table must start at the axis.",
                              ["data.table first row must be [0, 0]"])
    spline = CubicSpline(rows[:, 0], rows[:, 1])
    inside = r <= rows[-1, 0]
    phi0 = np.where(inside, spline(np.minimum(r, rows[-1, 0])), 0.0)
    Phi0 = np.where(inside, spline(np.minimum(r, rows[-1, 0]), 1), 0.0)
    if rows.shape[1] < 3:
        return phi0, Phi0, None
    momentum = CubicSpline(rows[:, 0], rows[:, 2])
    Pi0 = np.where(inside, momentum(np.minimum(r, rows[-1, 0])), 0.0)
    return phi0, Phi0, Pi0


def build_profile(profile: DataProfile, grid: RadialGrid) -> Dict[str, np.ndarray]:
    """Sample the profile on the grid; phi1 holds the momentum datum Pi."""
    if profile.kind in ("centered", "shell") and not profile.sigma > 0:
        raise ValidationError("Profile width must be positive.", [f"data.sigma={profile.sigma}"])

    phi0, _, Pi0 = profile_values(profile, grid.r)
    phi0[0] = 0.0
    Pi0[0] = 0.0

    if profile.kind != "poly" and profile.A != 0.0:
        tail = np.abs(phi0[grid.r >= 0.8 * grid.r_max])
        if tail.size and tail.max() > SUPPORT_TOLERANCE * abs(profile.A):
            raise SupportOverflow("Initial profile does not fit inside the grid.",
                                  f"tail {tail.max():.3e} beyond r={0.8 * grid.r_max:.6g} exceeds "
                                  f"{SUPPORT_TOLERANCE:g}*A")
    return {"phi0": phi0, "phi1": Pi0}


def _even_midpoints(x: np.ndarray) -> np.ndarray:
    """Cubic interpolation of an even grid function to the interval midpoints."""
    n = len(x) - 1
    ext = np.concatenate(([x[1]], x))  # ext[k] = x[k-1], even reflection at the axis
    mid = np.empty(n)
    mid[:n - 1] = (-ext[0:n - 1] + 9.0 * ext[1:n] + 9.0 * ext[2:n + 1] - ext[3:n + 2]) / 16.0
    mid[n - 1] = (x[n - 3] - 5.0 * x[n - 2] + 15.0 * x[n - 1] + 5.0 * x[n]) / 16.0
    return mid


def rotational_density(state: PolarState) -> np.ndarray:
    """(g(phi)/r)^2 with the axis limit Phi(0)^2"""
    r = state.grid.r
    g_over_r = np.empty_like(state.phi)
    g_over_r[0] = state.Phi[0]
    g_over_r[1:] = np.asarray(state.target.g(state.phi[1:])) / r[1:]
    return np.square(g_over_r)


def _check_finite(state: PolarState):
    for name in ("phi", "Phi", "Pi"):
        values = getattr(state, name)
        if not np.all(np.isfinite(values)):
            bad = int(np.argmax(~np.isfinite(values)))
            raise NonFiniteField(f"Field {name} is not finite.", f"t={state.t}, first bad index {bad}")


def solve_metric_slice(state: PolarState):
    """Integrate beta_r and alpha_r outward from the axis with classical RK4.

    beta_r = r k/2 (Pi^2 + Phi^2) + r k/2 e^(2 beta) (g/r)^2
    alpha_r = r k/2 (Pi^2 + Phi^2) - r k/2 e^(2 beta) (g/r)^2
    alpha(0) = beta(0) = 0. Sets and returns (alpha, beta).
    """
    _check_finite(state)
    grid = state.grid
    kappa = state.kappa
    n, dr = grid.n, grid.dr

    if kappa == 0.0:
        state.alpha = np.zeros(n + 1)
        state.beta = np.zeros(n + 1)
        return state.alpha, state.beta

    r = grid.r
    r_mid = r[:-1] + 0.5 * dr
    kinetic = np.square(state.Pi) + np.square(state.Phi)
    rot = rotational_density(state)

    half_k = 0.5 * kappa
    s_node = (half_k * r * kinetic).tolist()
    s_mid = (half_k * r_mid * _even_midpoints(kinetic)).tolist()
    q_node = (half_k * r * rot).tolist()
    q_mid = (half_k * r_mid * _even_midpoints(rot)).tolist()

    alpha = [0.0] * (n + 1)
    beta = [0.0] * (n + 1)
    half_dr = 0.5 * dr
    b = 0.0
    a = 0.0
    try:
        for i in range(n):
            e1 = q_node[i] * math.exp(2.0 * b)
            k1b, k1a = s_node[i] + e1, s_node[i] - e1
            e2 = q_mid[i] * math.exp(2.0 * (b + half_dr * k1b))
            k2b, k2a = s_mid[i] + e2, s_mid[i] - e2
            e3 = q_mid[i] * math.exp(2.0 * (b + half_dr * k2b))
            k3b, k3a = s_mid[i] + e3, s_mid[i] - e3
            e4 = q_node[i + 1] * math.exp(2.0 * (b + dr * k3b))
            k4b, k4a = s_node[i + 1] + e4, s_node[i + 1] - e4
            b += dr / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
            a += dr / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
            if not math.isfinite(b) or b > BETA_GUARD:
                raise SupercriticalEnergy("Metric function beta blew up: kappa*E(t,r)/2pi reached 1.",
                                          f"t={state.t}, r={r[i + 1]:.6g}, beta={b:.6g}")
            alpha[i + 1] = a
            beta[i + 1] = b
    except OverflowError:
        raise SupercriticalEnergy("Metric function beta overflowed: kappa*E(t,r)/2pi reached 1.",
                                  f"t={state.t}")

    state.alpha = np.asarray(alpha)
    state.beta = np.asarray(beta)
    return state.alpha, state.beta


def energy_densities(state: PolarState):
    """Energy density e and momentum density m of the slice."""
    e2b = np.exp(-2.0 * state.beta)
    rot = rotational_density(state)
    e = 0.5 * e2b * (np.square(state.Pi) + np.square(state.Phi)) + 0.5 * rot
    m = e2b * state.Pi * state.Phi
    return e, m


def energy_profile(state: PolarState) -> np.ndarray:
    """Cumulative E(t, r) = 2 pi int_0^r e r e^beta dr on the grid"""
    e, _ = energy_densities(state)
    integrand = TWO_PI * e * state.grid.r * np.exp(state.beta)
    return cumulative_trapezoid(integrand, state.grid.r, initial=0.0)


def energy(state: PolarState, r_stop: Optional[float] = None) -> float:
    profile = energy_profile(state)
    if r_stop is None or np.isinf(r_stop):
        return float(profile[-1])
    if not 0.0 <= r_stop <= state.grid.r_max:
        raise DomainError("Energy radius outside the grid.", f"r_stop={r_stop}, r_max={state.grid.r_max}")
    return float(np.interp(r_stop, state.grid.r, profile))


def check_subcriticality(state: PolarState, margin: float = SUBCRITICAL_MARGIN) -> Dict:
    E0 = energy(state)
    ratio = state.kappa * E0 / TWO_PI
    report = {
        "E0": E0,
        "kappa_E_over_2pi": ratio,
        "m_infinity": 1.0 - (1.0 - ratio) ** 2,
        "admissible": bool(ratio < 1.0 - margin),
    }
    logger.debug(f"Subcriticality at t={state.t}: {report}")
    return report


def _check_phi_consistency(profile: DataProfile, grid: RadialGrid, Phi0: np.ndarray):
    """Phi0 must be d_r phi0 of the same profile, checked by a fine central difference off the grid."""
    step = min(PHI_CONSISTENCY_STEP, 0.25 * grid.dr)
    r = grid.r[1:]
    if profile.kind == "custom-table" and profile.table:
        r_end = float(np.asarray(profile.table, dtype=float)[-1, 0])
        r = r[np.abs(r - r_end) > step]
    plus, _, _ = profile_values(profile, r + step)
    minus, _, _ = profile_values(profile, r - step)
    given = np.interp(r, grid.r, Phi0)
    mismatch = float(np.max(np.abs((plus - minus) / (2.0 * step) - given), initial=0.0))
    scale = max(1.0, float(np.max(np.abs(Phi0))))
    logger.debug(f"Initial Phi vs d_r phi: max mismatch {mismatch:.3e}")
    if mismatch > PHI_CONSISTENCY_TOLERANCE * scale:
        raise ValidationError("Initial Phi is not the radial derivative of phi.",
                              [f"max |Phi0 - d_r phi0| = {mismatch:.3e} exceeds {PHI_CONSISTENCY_TOLERANCE:g}*{scale:.3g}"])


def build_initial_state(profile: DataProfile, grid: RadialGrid, kappa: float = DEFAULT_KAPPA,
                        target: Optional[TargetGeometry] = None) -> PolarState:
    """Sample the profile, set Phi = d_r phi analytically and solve the metric."""
    data = build_profile(profile, grid)
    _, Phi0, _ = profile_values(profile, grid.r)
    t0 = profile.t0 if profile.kind == "poly" else 0.0
    state = PolarState(t0, grid, data["phi0"], Phi0, data["phi1"], kappa=kappa, target=target)

    _check_phi_consistency(profile, grid, Phi0)

    solve_metric_slice(state)
    logger.info(f"Built initial data {profile!r} on {grid!r}; E0={energy(state):.10g}")
    return state
