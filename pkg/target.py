"""
Module for rotationally symmetric target geometries and the structural
conditions on g (Grillakis, geodesic convexity, divergence of the potential)
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P
from scipy.integrate import quad
from scipy.optimize import brentq

from config import DEFAULT_SERIES_SWITCH
from exceptions import DomainError, TargetEvaluationError, ValidationError
from target_configs import get_target_config

logger = logging.getLogger(__name__)


def _as_output(values):
    values = np.asarray(values, dtype=float)
    return float(values) if values.ndim == 0 else values


class TargetGeometry:
    """Target metric d(rho)^2 + g(rho)^2 d(theta)^2 with g odd and g'(0) = 1.

    All evaluators accept scalars or numpy arrays.
    """

    def __init__(self, name, g, dg, d2g, f=None, wp=None, zeta_series=(),
                 series_switch=DEFAULT_SERIES_SWITCH, params=None, remainder=None):
        self.name = name
        self._g = g
        self._dg = dg
        self._d2g = d2g
        self._f = f
        self._wp = wp
        self._remainder = remainder
        self.zeta_series = tuple(float(c) for c in zeta_series)
        self.series_switch = float(series_switch)
        self.params = dict(params or {})

    def __repr__(self):
        return f"TargetGeometry(name={self.name!r}, params={self.params!r})"

    def g(self, s):
        return _as_output(self._g(np.asarray(s, dtype=float)))

    def dg(self, s):
        return _as_output(self._dg(np.asarray(s, dtype=float)))

    def d2g(self, s):
        return _as_output(self._d2g(np.asarray(s, dtype=float)))

    def f(self, s):
        s = np.asarray(s, dtype=float)
        if self._f is not None:
            return _as_output(self._f(s))
        return _as_output(self._g(s) * self._dg(s))

    def df(self, s):
        """f'(s) = g'(s)^2 + g(s) g''(s)"""
        s = np.asarray(s, dtype=float)
        return _as_output(self._dg(s) ** 2 + self._g(s) * self._d2g(s))

    def zeta_rem(self, s):
        """(f(s) - s)/s^3, through its Taylor series for |s| < series_switch"""
        s = np.asarray(s, dtype=float)
        s2 = s * s
        series = P.polyval(s2, self.zeta_series) if self.zeta_series else np.zeros_like(s)
        if np.isinf(self.series_switch):
            return _as_output(series)
        small = np.abs(s) < self.series_switch
        safe = np.where(small, 1.0, s)
        if self._remainder is not None:
            direct = np.asarray(self._remainder(safe), dtype=float)
        else:
            direct = (np.asarray(self.f(safe)) - safe) / (safe * safe * safe)
        return _as_output(np.where(small, series, direct))

    def wp(self, s):
        """Potential wp(s) = int_0^s g"""
        s = np.asarray(s, dtype=float)
        if self._wp is not None:
            return _as_output(self._wp(s))
        integrate = np.vectorize(lambda x: quad(lambda y: float(self._g(np.asarray(y))), 0.0, x)[0])
        return _as_output(integrate(s))

    def to_spec(self) -> Dict:
        return {"kind": self.name, "params": dict(self.params)}


def _custom_target(coefficients: Sequence[float], series_switch: float) -> TargetGeometry:
    coefficients = [float(c) for c in coefficients]
    if not coefficients:
        raise ValidationError("Custom target needs at least one coefficient.",
                              ["target.params.coefficients must be a non-empty list"])
    if not all(np.isfinite(coefficients)):
        raise TargetEvaluationError("Custom target coefficients must be finite.", f"{coefficients}")
    if coefficients[0] != 1.0:
        logger.warning(f"Custom target leading coefficient {coefficients[0]} forced to 1 (g'(0) = 1)")
        coefficients[0] = 1.0

    g_coef = np.zeros(2 * len(coefficients))
    g_coef[1::2] = coefficients
    g_poly = Polynomial(g_coef)
    dg_poly = g_poly.deriv()
    d2g_poly = g_poly.deriv(2)
    f_poly = g_poly * dg_poly
    wp_poly = g_poly.integ()

    # f is odd with f(s) = s + f3 s^3 + f5 s^5 + ..., so zeta_rem is exact in s^2
    f_coef = f_poly.coef
    zeta = tuple(f_coef[k] for k in range(3, len(f_coef), 2))

    return TargetGeometry(
        name="custom",
        g=g_poly, dg=dg_poly, d2g=d2g_poly, f=f_poly, wp=wp_poly,
        zeta_series=zeta or (0.0,),
        series_switch=np.inf,
        params={"coefficients": coefficients, "series_switch": series_switch},
    )


def build_target(spec: Optional[Dict] = None) -> TargetGeometry:
    """Build a target from a config entry {kind, params}."""
    spec = spec or {"kind": "hyperbolic"}
    kind = spec.get("kind", "hyperbolic")
    params = dict(spec.get("params") or {})
    series_switch = float(params.get("series_switch", DEFAULT_SERIES_SWITCH))
    if series_switch <= 0:
        raise ValidationError("Invalid target parameters.", ["target.params.series_switch must be > 0"])

    if kind == "custom":
        target = _custom_target(params.get("coefficients", []), series_switch)
    else:
        entry = get_target_config(kind)
        target = TargetGeometry(
            name=entry["name"], g=entry["g"], dg=entry["dg"], d2g=entry["d2g"],
            f=entry["f"], wp=entry["wp"], zeta_series=entry["zeta_series"],
            series_switch=series_switch, params=params, remainder=entry.get("zeta_rem"),
        )
    logger.debug(f"Built target {target!r}")
    return target


def eval_target(target: TargetGeometry, s: float) -> Dict[str, float]:
    """Evaluate g, g', f, zeta_rem and wp at s."""
    values = {
        "g": target.g(s),
        "dg": target.dg(s),
        "f": target.f(s),
        "zeta_rem": target.zeta_rem(s),
        "wp": target.wp(s),
    }
    bad = [key for key, value in values.items() if not np.all(np.isfinite(value))]
    if bad:
        raise TargetEvaluationError(f"Target '{target.name}' produced non-finite values at s={s}.",
                                    f"fields: {', '.join(bad)}")
    return values


def grillakis_margin(target: TargetGeometry, s):
    """s g'(s) + g(s); the Grillakis condition asks for this to be positive on s > 0."""
    s = np.asarray(s, dtype=float)
    return _as_output(s * np.asarray(target.dg(s)) + np.asarray(target.g(s)))


def check_target_admissibility(target: TargetGeometry, s_max: float, n_samples: int) -> Dict:
    if s_max <= 0 or n_samples < 2:
        raise DomainError("Admissibility check needs s_max > 0 and at least two samples.",
                          f"s_max={s_max}, n_samples={n_samples}")
    samples = np.linspace(0.0, s_max, n_samples + 1)[1:]
    margins = np.asarray(grillakis_margin(target, samples))
    slopes = np.asarray(target.dg(samples))
    report = {
        "grillakis_ok": bool(np.all(margins > 0)),
        "convex_ok": bool(np.all(slopes >= 0)),
        "wp_divergence_hint": float(target.wp(s_max)),
    }
    logger.debug(f"Admissibility of '{target.name}' on (0, {s_max}]: {report}")
    return report


def first_grillakis_failure(target: TargetGeometry, s_max: float, n_samples: int = 1000) -> Optional[float]:
    """Smallest s in (0, s_max] where the Grillakis margin vanishes, or None."""
    samples = np.linspace(0.0, s_max, n_samples + 1)[1:]
    margins = np.asarray(grillakis_margin(target, samples))
    failing = np.nonzero(margins <= 0)[0]
    if failing.size == 0:
        return None
    k = failing[0]
    if k == 0:
        return float(samples[0])
    return float(brentq(lambda s: grillakis_margin(target, s), samples[k - 1], samples[k], xtol=1e-14))
