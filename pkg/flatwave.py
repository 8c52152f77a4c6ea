"""
Flat radial wave operators: the kernels K and J, the mu/lambda* geometry of
the backward region, the |lambda d_u mu| bound, the Duhamel representation of
the equivariant wave equation and exact polynomial solutions of the
w-operator -d_tau^2 + d_rho^2 + (3/rho) d_rho.
"""
import math
import logging
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Optional

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import IntegrationWarning, quad
from scipy.special import ellipe, ellipk

from config import (KERNEL_EPSABS, KERNEL_EPSREL, KERNEL_LIMIT, REPRESENTATION_EPSABS,
                    REPRESENTATION_EPSREL, REPRESENTATION_LIMIT)
from exceptions import DomainError, QuadratureFailure

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * math.pi
# Normalization of the 2+1 retarded Green's function after the angular integration
REPRESENTATION_CONSTANT = -1.0 / (math.pi * math.sqrt(2.0))


@dataclass(frozen=True)
class KernelSample:
    mu: float
    K_val: float
    J_val: float
    abs_err_estimate: float
    err_K: float = 0.0
    err_J: float = 0.0


@dataclass(frozen=True)
class MuGeometry:
    tau: float
    rho: float
    sigma: float
    lam: float
    mu: float
    lambda_star: float
    lambda_du_mu: float


def _quad(fn, a, b, **kwargs):
    return quad(fn, a, b, epsabs=KERNEL_EPSABS, epsrel=KERNEL_EPSREL, limit=KERNEL_LIMIT, **kwargs)


@lru_cache(maxsize=8192)
def _kernels(mu: float):
    """(K, J, K', J') and the quadrature error estimates of K and J at mu != 1."""
    if mu < 1.0:
        # x = 1 - (1+mu) cos^2(theta) maps [max(-mu,-1), 1] onto [0, pi/2]; D = 1 + x
        a, b = 1.0 - mu, 1.0 + mu

        def D(th):
            return a + b * math.sin(th) ** 2

        J, err_J = _quad(lambda th: 2.0 / math.sqrt(D(th)), 0.0, HALF_PI)
        K, err_K = _quad(lambda th: 2.0 * (D(th) - 1.0) / math.sqrt(D(th)), 0.0, HALF_PI)
        dJ, _ = _quad(lambda th: math.cos(th) ** 2 * D(th) ** -1.5, 0.0, HALF_PI)
        dK, _ = _quad(lambda th: -math.cos(th) ** 2 * (D(th) ** -0.5 + D(th) ** -1.5), 0.0, HALF_PI)
    else:
        # x = -cos(2 theta) covers [-1, 1]; D = mu + x
        a = mu - 1.0

        def D(th):
            return a + 2.0 * math.sin(th) ** 2

        J, err_J = _quad(lambda th: 2.0 / math.sqrt(D(th)), 0.0, HALF_PI)
        K, err_K = _quad(lambda th: -2.0 * math.cos(2.0 * th) / math.sqrt(D(th)), 0.0, HALF_PI)
        dJ, _ = _quad(lambda th: -D(th) ** -1.5, 0.0, HALF_PI)
        dK, _ = _quad(lambda th: math.cos(2.0 * th) * D(th) ** -1.5, 0.0, HALF_PI)
    return K, J, dK, dJ, err_K, err_J


def _check_mu(mu):
    mu = float(mu)
    if not mu >= -1.0:
        raise DomainError("Kernels are defined for mu >= -1.", f"mu={mu}")
    return mu


def kernel_K(mu: float) -> float:
    """K(mu) = int_{max(-mu,-1)}^1 x dx / (sqrt(1-x^2) sqrt(mu+x)); log-singular at mu = 1."""
    mu = _check_mu(mu)
    if mu == 1.0:
        return -math.inf
    return _kernels(mu)[0]


def kernel_J(mu: float) -> float:
    """J(mu) = int_{max(-mu,-1)}^1 dx / (sqrt(1-x^2) sqrt(mu+x)); log-singular at mu = 1."""
    mu = _check_mu(mu)
    if mu == 1.0:
        return math.inf
    return _kernels(mu)[1]


def kernel_dK(mu: float) -> float:
    mu = _check_mu(mu)
    if mu == 1.0:
        return math.nan
    return _kernels(mu)[2]


def kernel_dJ(mu: float) -> float:
    mu = _check_mu(mu)
    if mu == 1.0:
        return math.nan
    return _kernels(mu)[3]


def kernel_sample(mu: float) -> KernelSample:
    mu = _check_mu(mu)
    if mu == 1.0:
        return KernelSample(mu, -math.inf, math.inf, 0.0)
    K, J, _, _, err_K, err_J = _kernels(mu)
    return KernelSample(mu, K, J, max(err_K, err_J), err_K, err_J)


def kernel_closed_form(mu: float):
    """(K, J) through complete elliptic integrals (scipy parameter convention)."""
    mu = _check_mu(mu)
    if mu == 1.0:
        return -math.inf, math.inf
    if mu < 1.0:
        m = -(1.0 + mu) / (1.0 - mu)
        scale = 2.0 / math.sqrt(1.0 - mu)
        J = scale * ellipk(m)
        K = scale * ((1.0 - mu) * ellipe(m) - ellipk(m))
    else:
        m = 2.0 / (mu + 1.0)
        J = 2.0 / math.sqrt(mu + 1.0) * ellipk(m)
        K = 2.0 * math.sqrt(mu + 1.0) * ellipe(m) - mu * J
    return float(K), float(J)


def _mu_fields(tau, rho, sigma, lam):
    d = np.abs(np.asarray(tau, dtype=float) - sigma)
    mu = (d * d - rho * rho - lam * lam) / (2.0 * rho * lam)
    with np.errstate(invalid="ignore"):
        lambda_star = np.sqrt((1.0 + tau) ** 2 + (mu * mu - 1.0) * rho * rho) - mu * rho
    lambda_du_mu = _lambda_du_mu(rho, lam, mu, d)
    return mu, lambda_star, lambda_du_mu


def _lambda_du_mu(rho, lam, mu, d):
    """(lam + rho mu - d)/(2 rho), with the cancellation-free form for mu >= 0."""
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        factored = rho * (mu * mu - 1.0) / (2.0 * (lam + rho * mu + d))
        direct = (lam + rho * mu - d) / (2.0 * rho)
    out = np.where(mu >= 0.0, factored, direct)
    return float(out) if out.ndim == 0 else out


def mu_geometry(tau: float, rho: float, sigma: float, lam: float) -> MuGeometry:
    if not rho > 0 or not lam > 0:
        raise DomainError("mu geometry needs rho > 0 and lambda > 0.", f"rho={rho}, lambda={lam}")
    mu, lambda_star, lambda_du_mu = _mu_fields(tau, rho, sigma, lam)
    return MuGeometry(float(tau), float(rho), float(sigma), float(lam),
                      float(mu), float(lambda_star), float(lambda_du_mu))


def bound_lambda_du_mu(samples: int, seed: int = 0) -> Dict:
    """Sample |lambda d_u mu| / |mu - 1| over random points of the backward region."""
    if samples < 1:
        raise DomainError("Need at least one sample.", f"samples={samples}")
    rng = np.random.default_rng(seed)
    tau = -rng.uniform(0.0, 1.0, samples) * (1.0 - 1e-12) - 1e-12
    rho = np.abs(tau) * (1.0 - rng.uniform(0.0, 1.0, samples))
    lam = 2.0 * (1.0 - rng.uniform(0.0, 1.0, samples))
    d = np.abs(rho - lam) + 3.0 * rng.uniform(0.0, 1.0, samples)
    sigma = tau - d

    mu, _, ldm = _mu_fields(tau, rho, sigma, lam)
    keep = np.abs(mu - 1.0) > 1e-8
    ratio = np.abs(ldm[keep]) / np.abs(mu[keep] - 1.0)
    nonneg = mu[keep] >= 0.0

    max_nonneg = float(ratio[nonneg].max()) if np.any(nonneg) else 0.0
    max_neg = float(ratio[~nonneg].max()) if np.any(~nonneg) else 0.0
    report = {
        "samples": int(samples),
        "n_nonneg": int(np.count_nonzero(nonneg)),
        "n_neg": int(np.count_nonzero(~nonneg)),
        "max_ratio_nonneg": max_nonneg,
        "max_ratio_neg": max_neg,
        "C_global": max(max_nonneg, max_neg),
        "nonneg_bound_ok": bool(max_nonneg <= 0.5 + 1e-12),
    }
    if not report["nonneg_bound_ok"]:
        logger.error(f"|lambda d_u mu|/|mu-1| exceeded 1/2 on mu >= 0: {max_nonneg!r}")
    return report


# --- exact polynomial solutions of the w-operator ---

POLY_SOLUTIONS = {
    "const": {(0, 0): 1.0},
    "linear": {(1, 0): 1.0},
    "quad": {(2, 0): 4.0, (0, 2): 1.0},
    "cubic": {(3, 0): 1.0, (1, 2): 0.75},
}


def _pad(c, shape):
    out = np.zeros(shape)
    out[:c.shape[0], :c.shape[1]] = c
    return out


class PolySolution:
    """w(tau, rho) = sum c[i, j] tau^i rho^j solving -w_tt + w_rr + 3 w_r / rho = 0"""

    def __init__(self, kind: str, terms: Dict):
        self.kind = kind
        shape = (max(i for i, _ in terms) + 1, max(j for _, j in terms) + 1)
        self.coef = np.zeros(shape)
        for (i, j), value in terms.items():
            self.coef[i, j] = value
        residual = self.operator_coefficients()
        if not np.allclose(residual, 0.0, atol=1e-14):
            raise ValueError(f"Polynomial '{kind}' does not solve the w-operator: {residual}")

    def __repr__(self):
        return f"PolySolution({self.kind!r})"

    def operator_coefficients(self) -> np.ndarray:
        """Coefficients of (-d_tau^2 + d_rho^2 + 3 rho^-1 d_rho) w"""
        c = self.coef
        c_r = P.polyder(c, 1, axis=1)
        if np.any(c_r[:, 0] != 0.0):
            raise ValueError(f"Polynomial '{self.kind}' has a term linear in rho; rho^-1 d_rho w is singular")
        c_r_over_rho = c_r[:, 1:] if c_r.shape[1] > 1 else np.zeros((c.shape[0], 1))
        shape = c.shape
        return (-_pad(P.polyder(c, 2, axis=0), shape)
                + _pad(P.polyder(c, 2, axis=1), shape)
                + 3.0 * _pad(c_r_over_rho, shape))

    def derivative(self, d_tau: int = 0, d_rho: int = 0) -> np.ndarray:
        c = self.coef
        if d_tau:
            c = P.polyder(c, d_tau, axis=0)
        if d_rho:
            c = P.polyder(c, d_rho, axis=1)
        return c

    @staticmethod
    def _eval(c, tau, rho):
        tau, rho = np.broadcast_arrays(np.asarray(tau, dtype=float), np.asarray(rho, dtype=float))
        out = P.polyval2d(tau, rho, c)
        return float(out) if np.ndim(out) == 0 else out

    def __call__(self, tau, rho):
        return self._eval(self.coef, tau, rho)

    def equivariant_fields(self, t, r) -> Dict[str, np.ndarray]:
        """phi = r w with Phi = d_r phi, Pi = d_t phi and their time derivatives (flat, kappa = 0)."""
        t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
        w = self._eval(self.coef, t, r)
        w_t = self._eval(self.derivative(1, 0), t, r)
        w_r = self._eval(self.derivative(0, 1), t, r)
        w_tt = self._eval(self.derivative(2, 0), t, r)
        w_tr = self._eval(self.derivative(1, 1), t, r)
        return {
            "phi": r * w,
            "Phi": w + r * w_r,
            "Pi": r * w_t,
            "dphi": r * w_t,
            "dPhi": w_t + r * w_tr,
            "dPi": r * w_tt,
        }


@lru_cache(maxsize=None)
def exact_poly_solution(kind: str) -> PolySolution:
    if kind not in POLY_SOLUTIONS:
        raise DomainError(f"Unknown polynomial solution '{kind}'.",
                          f"choose one of {', '.join(POLY_SOLUTIONS)}")
    return PolySolution(kind, POLY_SOLUTIONS[kind])


# --- Duhamel representation of (-d_tau^2 + d_rho^2 + rho^-1 d_rho - rho^-2) phi = h ---

def _zero(sigma, lam):
    return 0.0


def represent_solution(phi0: Callable[[float, float], float],
                       F1: Optional[Callable[[float, float], float]],
                       F2: Optional[Callable[[float, float], float]],
                       tau: float, rho: float, quad_cfg: Optional[Dict] = None) -> float:
    """phi(tau, rho) for the source h = d_u(F1/rho) + F2/rho^2 with data at tau = -1.

    phi0 is the free solution carrying the data. The F1 part is integrated by
    parts in u; its axis boundary term is dropped, which requires
    F1 = o(lambda^(1/2)) at the axis.
    """
    if not -1.0 < tau < 0.0 or not 0.0 < rho <= abs(tau):
        raise DomainError("Representation formula needs tau in (-1, 0) and rho in (0, |tau|].",
                          f"tau={tau}, rho={rho}")
    cfg = {"epsabs": REPRESENTATION_EPSABS, "epsrel": REPRESENTATION_EPSREL, "limit": REPRESENTATION_LIMIT}
    cfg.update(quad_cfg or {})

    base = float(phi0(tau, rho))
    if F1 is None and F2 is None:
        return base
    F1 = F1 or _zero
    F2 = F2 or _zero
    _check_sources(F1, F2, tau, rho)

    sqrt_rho = math.sqrt(rho)
    K_boundary = kernel_K(-1.0)
    errors = []

    def integrate(fn, a, b, points=None):
        if b <= a:
            return 0.0, 0.0
        kwargs = {"epsabs": cfg["epsabs"], "epsrel": cfg["epsrel"], "limit": cfg["limit"]}
        if points:
            inside = [p for p in points if a < p < b]
            if inside:
                kwargs["points"] = inside
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            value, err = quad(fn, a, b, **kwargs)
        return value, err

    def outer(fn, a, b, points=None, label=""):
        value, err = integrate(fn, a, b, points)
        errors.append((label, value, err))
        return value

    def inner(fn, a, b, points=None):
        return integrate(fn, a, b, points)[0]

    # mantle u = tau - rho, where mu = -1; lambda = sigma - tau + rho
    sigma0 = max(-1.0, tau - rho)
    lam0 = sigma0 - tau + rho
    if lam0 == 0.0:
        mantle = outer(lambda s: 2.0 * K_boundary * F1(sigma0 + s * s, s * s) / sqrt_rho,
                       0.0, math.sqrt(tau - sigma0), label="mantle")
    else:
        mantle = outer(lambda sg: K_boundary * F1(sg, sg - tau + rho) / (sqrt_rho * math.sqrt(sg - tau + rho)),
                       sigma0, tau, label="mantle")

    # initial slice sigma = -1, lambda = s^2
    lam_lo = max(0.0, rho - tau - 1.0)
    lam_hi = tau + rho + 1.0
    lam_mu_one = tau + 1.0 - rho

    def bottom_integrand(s):
        lam = s * s
        mu = ((tau + 1.0) ** 2 - rho * rho - lam * lam) / (2.0 * rho * lam)
        if mu < -1.0:
            mu = -1.0
        if mu == 1.0:
            return 0.0
        return -kernel_K(mu) * F1(-1.0, lam) / sqrt_rho

    bottom = outer(bottom_integrand, math.sqrt(lam_lo), math.sqrt(lam_hi),
                   points=[math.sqrt(lam_mu_one)] if lam_mu_one > 0 else None, label="initial slice")

    # bulk in (mu, lambda), lambda = s^2; d sigma d lambda = rho lambda / d  d mu d lambda
    def bulk_in_mu(mu):
        if mu == 1.0:
            return 0.0
        lam_star = math.sqrt(max((1.0 + tau) ** 2 + (mu * mu - 1.0) * rho * rho, 0.0)) - mu * rho
        if (1.0 + tau) ** 2 + (mu * mu - 1.0) * rho * rho < 0.0 or lam_star <= 0.0:
            return 0.0
        K, _, dK, _, _, _ = _kernels(mu)

        def integrand(s):
            lam = s * s
            d = math.sqrt(max(rho * rho + lam * lam + 2.0 * rho * lam * mu, 0.0))
            if d == 0.0:
                return 0.0
            sigma = tau - d
            f1 = F1(sigma, lam)
            f2 = F2(sigma, lam)
            ldm = _lambda_du_mu(rho, lam, mu, d)
            return 2.0 * sqrt_rho / d * (K * (0.25 * f1 + f2) - ldm * dK * f1)

        return inner(integrand, 0.0, math.sqrt(lam_star), points=[sqrt_rho])

    bulk = (outer(bulk_in_mu, -1.0, 1.0, label="bulk mu<1")
            + outer(bulk_in_mu, 1.0, math.inf, label="bulk mu>1"))

    for label, value, err in errors:
        allowed = 100.0 * max(cfg["epsabs"], cfg["epsrel"] * abs(value))
        if err > allowed:
            raise QuadratureFailure(f"Representation quadrature '{label}' did not converge.",
                                    f"estimate {err:.3e} exceeds {allowed:.3e} at tau={tau}, rho={rho}")

    correction = REPRESENTATION_CONSTANT * (mantle + bottom + bulk)
    logger.debug(f"Representation at (tau={tau}, rho={rho}): mantle={mantle:.6e}, "
                 f"initial={bottom:.6e}, bulk={bulk:.6e}")
    return base + correction


def _check_sources(F1, F2, tau, rho):
    """Spot-check that the sources are finite on a few points of the backward region."""
    for frac in (0.25, 0.5, 0.75):
        sigma = -1.0 + frac * (tau + 1.0)
        for lam in (frac * rho, rho, rho + frac * (tau - sigma)):
            for name, fn in (("F1", F1), ("F2", F2)):
                value = fn(sigma, lam)
                if not math.isfinite(value):
                    raise DomainError(f"Source {name} is not finite in the backward region.",
                                      f"sigma={sigma}, lambda={lam}")
