"""
Double-null characteristic evolution of (r, log Omega, phi) on the (u, u_bar)
triangle 0 <= u <= u_bar <= u_bar_max, marched cell by cell with a diamond
(midpoint source) scheme. Nodes below the axis diagonal hold nan.
"""
import logging
from typing import Dict, List, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from config import DEFAULT_KAPPA, DIAMOND_CORRECTIONS, MARGINAL_TOLERANCE
from exceptions import FocusingBreakdown, NonFiniteField, RegionBreach, ValidationError
from initdata import DataProfile, profile_values
from target import TargetGeometry, build_target

logger = logging.getLogger(__name__)

REGION_LABELS = ("R", "T", "A", "X")


class NullGrid:
    """Nodes (u_i, u_bar_j) = (i h, j h) with 0 <= i <= j <= n; the axis is i = j."""

    def __init__(self, h: float, n: int):
        if not h > 0:
            raise ValidationError("Characteristic step must be positive.", [f"null.h must be > 0, got {h}"])
        if n < 3:
            raise ValidationError("Characteristic grid too coarse.", [f"null.u_bar_max/null.h must be >= 3, got {n}"])
        self.h = float(h)
        self.n = int(n)
        self.u = self.h * np.arange(self.n + 1, dtype=float)
        self.u_bar = self.u.copy()
        i, j = np.indices((self.n + 1, self.n + 1))
        self.domain = j >= i
        self.separation = (j - i) * self.h

    @classmethod
    def from_extent(cls, u_bar_max: float, h: float) -> "NullGrid":
        return cls(h, int(round(float(u_bar_max) / float(h))))

    @property
    def u_min(self) -> float:
        return 0.0

    @property
    def u_max(self) -> float:
        return float(self.u[-1])

    def __repr__(self):
        return f"NullGrid(h={self.h}, n={self.n})"


class NullState:
    """March variables r, log Omega, phi plus the derived lambda, nu, Theta, Xi."""

    def __init__(self, grid: NullGrid, r, logOmega, phi, kappa=DEFAULT_KAPPA,
                 target: Optional[TargetGeometry] = None):
        self.grid = grid
        self.r = np.asarray(r, dtype=float)
        self.logOmega = np.asarray(logOmega, dtype=float)
        self.phi = np.asarray(phi, dtype=float)
        self.kappa = float(kappa)
        self.target = target if target is not None else build_target({"kind": "hyperbolic"})
        self.lam = np.full_like(self.r, np.nan)
        self.nu = np.full_like(self.r, np.nan)
        self.Theta = np.full_like(self.r, np.nan)
        self.Xi = np.full_like(self.r, np.nan)

    @property
    def Omega(self):
        return np.exp(self.logOmega)

    def copy(self) -> "NullState":
        other = NullState(self.grid, self.r.copy(), self.logOmega.copy(), self.phi.copy(), self.kappa, self.target)
        for name in ("lam", "nu", "Theta", "Xi"):
            setattr(other, name, getattr(self, name).copy())
        return other

    def __repr__(self):
        return f"NullState(grid={self.grid!r}, kappa={self.kappa}, target={self.target.name!r})"


class NullRunResult:
    def __init__(self, state: NullState, records: List[Dict]):
        self.state = state
        self.records = records


def _cone_data(profile: DataProfile):
    """phi and d phi/d u_bar on the cone u = 0, where t = r = u_bar/2."""
    if profile.kind == "poly":
        from flatwave import exact_poly_solution
        solution = exact_poly_solution(profile.solution)

        def data(u_bar):
            half = 0.5 * np.asarray(u_bar, dtype=float)
            fields = solution.equivariant_fields(profile.t0 + half, half)
            return fields["phi"], 0.5 * (fields["dphi"] + fields["Phi"])
        return data

    def data(u_bar):
        phi0, Phi0, _ = profile_values(profile, 0.5 * np.asarray(u_bar, dtype=float))
        return phi0, 0.5 * Phi0
    return data


def init_characteristic_data(profile: DataProfile, grid: NullGrid, kappa: float = DEFAULT_KAPPA,
                             target: Optional[TargetGeometry] = None) -> NullState:
    """Free data phi on u = 0 with Omega = 1 there; r from the focusing constraint r'' = -kappa r phi'^2.

    The constraint is integrated by classical RK4 from the axis with r = 0, r' = 1/2.
    """
    return _state_from_cone(grid, _cone_data(profile), kappa, target, repr(profile))


def init_from_cone_samples(grid: NullGrid, u_bar, phi, kappa: float = DEFAULT_KAPPA,
                           target: Optional[TargetGeometry] = None) -> NullState:
    """Cone data given as samples phi(u_bar) on u = 0, interpolated by a cubic spline."""
    spline = CubicSpline(np.asarray(u_bar, dtype=float), np.asarray(phi, dtype=float))
    slope = spline.derivative()

    def data(points):
        return spline(points), slope(points)
    return _state_from_cone(grid, data, kappa, target, "sampled cone data")


def _state_from_cone(grid: NullGrid, data, kappa, target, label) -> NullState:
    shape = (grid.n + 1, grid.n + 1)
    r = np.full(shape, np.nan)
    logOmega = np.full(shape, np.nan)
    phi = np.full(shape, np.nan)

    phi[0, :], _ = data(grid.u_bar)
    phi[0, 0] = 0.0
    logOmega[0, :] = 0.0

    def slope(u_bar):
        return float(np.asarray(data(np.array([u_bar]))[1])[0])

    def rhs(u_bar, y):
        return np.array([y[1], -kappa * y[0] * slope(u_bar) ** 2])

    h = grid.h
    y = np.array([0.0, 0.5])
    r[0, 0] = 0.0
    lam = [0.5]
    for j in range(grid.n):
        ub = grid.u_bar[j]
        k1 = rhs(ub, y)
        k2 = rhs(ub + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(ub + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(ub + h, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteField("Initial cone integration produced non-finite values.", f"u_bar={ub + h}")
        if y[1] <= 0.0:
            raise FocusingBreakdown("d r/d u_bar reached zero on the initial cone.",
                                    f"u_bar={ub + h:.6g}, kappa={kappa}")
        r[0, j + 1] = y[0]
        lam.append(y[1])

    state = NullState(grid, r, logOmega, phi, kappa, target)
    logger.info(f"Initial cone for {label}: lambda in [{min(lam):.6g}, 0.5], r(u_bar_max)={r[0, -1]:.6g}")
    return state


def _sources(r, logOmega, phi, r_u, r_ub, phi_u, phi_ub, kappa, target):
    Omega2 = np.exp(2.0 * logOmega)
    g_over_r2 = np.square(np.asarray(target.g(phi)) / r)
    F_r = 0.25 * kappa * Omega2 * r * g_over_r2
    F_logOmega = -0.5 * kappa * phi_u * phi_ub - 0.125 * kappa * Omega2 * g_over_r2
    F_phi = -(r_u * phi_ub + r_ub * phi_u) / (2.0 * r) - 0.25 * Omega2 * np.asarray(target.f(phi)) / np.square(r)
    return F_r, F_logOmega, F_phi


def diamond_march_step(A, B, C, h: float, kappa: float, target: TargetGeometry,
                       corrections: int = DIAMOND_CORRECTIONS):
    """Value at (u+h, u_bar+h) from corners A=(u, u_bar), B=(u+h, u_bar), C=(u, u_bar+h).

    Each corner is a tuple (r, log Omega, phi) of scalars or equal-length arrays.
    D = B + C - A + h^2 F(midpoint), F re-evaluated `corrections` times.
    """
    A = tuple(np.asarray(x, dtype=float) for x in A)
    B = tuple(np.asarray(x, dtype=float) for x in B)
    C = tuple(np.asarray(x, dtype=float) for x in C)
    D = tuple(b + c - a for a, b, c in zip(A, B, C))
    base = D
    for _ in range(corrections):
        mid = tuple(0.25 * (a + b + c + d) for a, b, c, d in zip(A, B, C, D))
        d_u = [(b - a + d - c) / (2.0 * h) for a, b, c, d in zip(A, B, C, D)]
        d_ub = [(c - a + d - b) / (2.0 * h) for a, b, c, d in zip(A, B, C, D)]
        F = _sources(mid[0], mid[1], mid[2], d_u[0], d_ub[0], d_u[2], d_ub[2], kappa, target)
        D = tuple(x + h * h * f for x, f in zip(base, F))

    if not all(np.all(np.isfinite(x)) for x in D):
        raise NonFiniteField("Diamond update produced non-finite values.", f"h={h}")
    lam = (D[0] - B[0]) / h
    nu = (D[0] - C[0]) / h
    if np.any(lam <= 0.0) or np.any(nu >= 0.0):
        raise RegionBreach("Left the regular region: lambda <= 0 or nu >= 0.",
                           f"min lambda={float(np.min(lam)):.3e}, max nu={float(np.max(nu)):.3e}")
    return D


def _shift(X: np.ndarray, k: int, axis: int) -> np.ndarray:
    """out[..., j] = X[..., j+k] along axis, nan where out of range."""
    out = np.full_like(X, np.nan)
    n = X.shape[axis]
    src = [slice(None)] * X.ndim
    dst = [slice(None)] * X.ndim
    if k >= 0:
        src[axis], dst[axis] = slice(k, n), slice(0, n - k)
    else:
        src[axis], dst[axis] = slice(0, n + k), slice(-k, n)
    out[tuple(dst)] = X[tuple(src)]
    return out


def derivative(X: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Second-order difference along axis, falling back to one-sided and then first-order stencils."""
    p1, m1 = _shift(X, 1, axis), _shift(X, -1, axis)
    p2, m2 = _shift(X, 2, axis), _shift(X, -2, axis)
    candidates = (
        (p1 - m1) / (2.0 * h),
        (-3.0 * X + 4.0 * p1 - p2) / (2.0 * h),
        (3.0 * X - 4.0 * m1 + m2) / (2.0 * h),
        (p1 - X) / h,
        (X - m1) / h,
    )
    out = np.full_like(X, np.nan)
    for candidate in candidates:
        out = np.where(np.isfinite(out), out, candidate)
    return out


def derive_fields(state: NullState) -> NullState:
    """Fill lambda, nu, Theta = r d phi/d u_bar and Xi = r d phi/d u.

    On the axis lambda = -nu = Omega/2, the regular-axis values that make m vanish there.
    """
    h = state.grid.h
    state.lam = derivative(state.r, h, axis=1)
    state.nu = derivative(state.r, h, axis=0)
    state.Theta = state.r * derivative(state.phi, h, axis=1)
    state.Xi = state.r * derivative(state.phi, h, axis=0)
    diag = np.arange(state.grid.n + 1)
    half_omega = 0.5 * np.exp(state.logOmega[diag, diag])
    state.lam[diag, diag] = half_omega
    state.nu[diag, diag] = -half_omega
    return state


def _axis_log_omega(r: np.ndarray, a: int, h: float) -> float:
    """log Omega at the axis node (a, a) from Omega = -2 nu, nu = d_u r taken one-sided along u_bar = a h."""
    c = r[a - 1::-1, a]  # r(a-1, a), r(a-2, a), ...
    if a >= 3:
        nu = (-18.0 * c[0] + 9.0 * c[1] - 2.0 * c[2]) / (6.0 * h)
    elif a == 2:
        nu = (-4.0 * c[0] + c[1]) / (2.0 * h)
    else:
        nu = -c[0] / h
    if not nu < 0.0:
        raise RegionBreach("Left the regular region: nu >= 0 next to the axis.",
                           f"axis node u={a * h:.6g}, nu={nu:.3e}")
    return float(np.log(-2.0 * nu))


def run_null(state: NullState, grid: Optional[NullGrid] = None,
             corrections: int = DIAMOND_CORRECTIONS) -> NullRunResult:
    """March anti-diagonals k = i + j; every cell on one anti-diagonal is independent.

    Axis nodes get r = 0 and phi = 0; log Omega there follows from the march through the
    regularity condition m = 0, so Omega = 1 holds on the initial cone only.
    """
    grid = grid or state.grid
    n, h = grid.n, grid.h
    state = state.copy()
    logger.info(f"Null march on {grid!r}, kappa={state.kappa}")
    for k in range(2, 2 * n + 1):
        if k % 2 == 0:
            a = k // 2
            state.r[a, a] = 0.0
            state.logOmega[a, a] = _axis_log_omega(state.r, a, h)
            state.phi[a, a] = 0.0
        i = np.arange(max(1, k - n), (k - 1) // 2 + 1)
        if i.size == 0:
            continue
        j = k - i
        corners = []
        for di, dj in ((1, 1), (0, 1), (1, 0)):
            corners.append((state.r[i - di, j - dj], state.logOmega[i - di, j - dj], state.phi[i - di, j - dj]))
        try:
            D = diamond_march_step(corners[0], corners[1], corners[2], h, state.kappa, state.target, corrections)
        except (RegionBreach, NonFiniteField) as e:
            e.detail = f"{e.detail}; anti-diagonal u+u_bar={k * h:.6g}"
            raise
        state.r[i, j], state.logOmega[i, j], state.phi[i, j] = D

    derive_fields(state)
    records = [_column_record(state, j) for j in range(1, n + 1)]
    logger.info(f"Null march done; min lambda={np.nanmin(state.lam):.6g}, max nu={np.nanmax(state.nu):.6g}")
    return NullRunResult(state, records)


def null_mass(state: NullState) -> np.ndarray:
    """m = 1 + 4 Omega^-2 nu lambda"""
    return 1.0 + 4.0 * np.exp(-2.0 * state.logOmega) * state.nu * state.lam


def _column_record(state: NullState, j: int) -> Dict:
    column = slice(0, j + 1)
    m = null_mass(state)[column, j]
    phi = state.phi[column, j]
    return {
        "u_bar": float(state.grid.u_bar[j]),
        "m_max": float(np.max(m)),
        "lam_min": float(np.min(state.lam[column, j])),
        "nu_max": float(np.max(state.nu[column, j])),
        "phi_max": float(np.max(np.abs(phi))),
    }


def null_constraint_residuals(state: NullState) -> Dict[str, float]:
    """L2 norms of d_u(Omega^-2 nu) + Omega^-2 r kappa phi_u^2 and its u_bar counterpart.

    Second differences of r with Omega^-2 averaged onto the half nodes; interior nodes only.
    """
    h = state.grid.h
    inv = np.exp(-2.0 * state.logOmega)
    result = {}
    for key, axis in (("res_Tuu", 0), ("res_Tvv", 1)):
        r_p, r_m = _shift(state.r, 1, axis), _shift(state.r, -1, axis)
        inv_p = 0.5 * (inv + _shift(inv, 1, axis))
        inv_m = 0.5 * (inv + _shift(inv, -1, axis))
        second = (inv_p * (r_p - state.r) - inv_m * (state.r - r_m)) / (h * h)
        phi_d = (_shift(state.phi, 1, axis) - _shift(state.phi, -1, axis)) / (2.0 * h)
        residual = second + inv * state.r * state.kappa * np.square(phi_d)
        values = residual[np.isfinite(residual)]
        result[key] = float(h * np.sqrt(np.sum(np.square(values))))
    return result


def classify_regions(state: NullState, tol: float = MARGINAL_TOLERANCE) -> np.ndarray:
    """R regular, T trapped, A marginally trapped, X any other sign pattern; '' outside the domain."""
    lam, nu = state.lam, state.nu
    labels = np.full(lam.shape, "", dtype="<U1")
    inside = state.grid.domain & np.isfinite(lam) & np.isfinite(nu)
    labels[inside] = "X"
    labels[inside & (lam > tol) & (nu < 0.0)] = "R"
    labels[inside & (lam < -tol) & (nu < 0.0)] = "T"
    labels[inside & (np.abs(lam) <= tol) & (nu < 0.0)] = "A"
    return labels


def stress_components(state: NullState) -> Dict[str, np.ndarray]:
    """S_uu = phi_u^2, S_ubub = phi_ub^2, S_uub = Omega^2 g(phi)^2/(4 r^2), axis limit 0 for S_uub."""
    h = state.grid.h
    phi_u = derivative(state.phi, h, axis=0)
    phi_ub = derivative(state.phi, h, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rot = np.where(state.r > 0.0, np.square(np.asarray(state.target.g(state.phi)) / state.r), 0.0)
    rot = np.where(state.grid.domain, rot, np.nan)
    return {"S_uu": np.square(phi_u), "S_ubub": np.square(phi_ub),
            "S_uub": 0.25 * np.exp(2.0 * state.logOmega) * rot}


def mass_flux_residual(state: NullState) -> float:
    """max |d_ub m - 4 kappa Omega^-2 r (S_uub lambda - S_ubub nu)| over nodes at least 2h off the axis.

    The centered d_ub m at separation h reaches the axis node, where m = 0 is imposed rather
    than computed, so the first column off the axis is left out.
    """
    h = state.grid.h
    m = null_mass(state)
    dm = (_shift(m, 1, 1) - _shift(m, -1, 1)) / (2.0 * h)
    stress = stress_components(state)
    predicted = 4.0 * state.kappa * np.exp(-2.0 * state.logOmega) * state.r * (
        stress["S_uub"] * state.lam - stress["S_ubub"] * state.nu)
    residual = np.abs(dm - predicted)
    residual = residual[np.isfinite(residual) & (state.grid.separation > 1.5 * h)]
    return float(np.max(residual)) if residual.size else 0.0


def axis_proper_time(state: NullState) -> np.ndarray:
    """tau(u) = int_0^u Omega du along the axis, where du = d u_bar."""
    diag = np.arange(state.grid.n + 1)
    return cumulative_trapezoid(np.exp(state.logOmega[diag, diag]), state.grid.u, initial=0.0)


def axis_w(state: NullState):
    """(tau, w) along the axis, w ~ phi/r sampled at the first node off each axis point.

    The node (i, i+1) sits midway between the axis nodes i and i+1, so its proper time is
    the average of theirs.
    """
    n = state.grid.n
    i = np.arange(n)
    tau = axis_proper_time(state)
    return 0.5 * (tau[i] + tau[i + 1]), state.phi[i, i + 1] / state.r[i, i + 1]
