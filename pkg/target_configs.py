"""
Target geometry configurations module
Built-in rotationally symmetric targets h = d(rho)^2 + g(rho)^2 d(theta)^2
"""
import logging
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P

from exceptions import ValidationError

logger = logging.getLogger(__name__)

# Each entry: g and its first two derivatives, f = g*g', the potential
# wp(s) = int_0^s g, the first five Taylor coefficients of
# zeta_rem(s) = (f(s) - s)/s^3 in powers of s^2, and zeta_rem itself
# evaluated without cancellation.

REMAINDER_TERMS = 16


def _trig_remainder(sign: float):
    """(f(s) - s)/s^3 for f(s) = sinh(2s)/2 (sign +1) or sin(2s)/2 (sign -1).

    sum_k sign^k 4^k s^(2k-2)/(2k+1)! for |s| < 1, where the direct quotient loses digits.
    """
    coefficients = np.array([sign ** k * 4.0 ** k / factorial(2 * k + 1) for k in range(1, REMAINDER_TERMS + 1)])
    half_double = np.sinh if sign > 0 else np.sin

    def remainder(s):
        s = np.asarray(s, dtype=float)
        small = np.abs(s) < 1.0
        safe = np.where(small, 1.0, s)
        direct = (0.5 * half_double(2.0 * safe) - safe) / (safe * safe * safe)
        return np.where(small, P.polyval(s * s, coefficients), direct)
    return remainder


FLAT_TARGET = {
    "name": "flat",
    "description": "Euclidean plane, g(rho) = rho",
    "g": lambda s: np.asarray(s, dtype=float) * 1.0,
    "dg": lambda s: np.ones_like(np.asarray(s, dtype=float)),
    "d2g": lambda s: np.zeros_like(np.asarray(s, dtype=float)),
    "f": lambda s: np.asarray(s, dtype=float) * 1.0,
    "wp": lambda s: 0.5 * np.square(s),
    "zeta_series": (0.0, 0.0, 0.0, 0.0, 0.0),
    "zeta_rem": lambda s: np.zeros_like(np.asarray(s, dtype=float)),
}

HYPERBOLIC_TARGET = {
    "name": "hyperbolic",
    "description": "Hyperbolic plane, g(rho) = sinh(rho)",
    "g": np.sinh,
    "dg": np.cosh,
    "d2g": np.sinh,
    "f": lambda s: 0.5 * np.sinh(2.0 * np.asarray(s, dtype=float)),
    "wp": lambda s: 2.0 * np.square(np.sinh(0.5 * np.asarray(s, dtype=float))),
    "zeta_series": (2.0 / 3.0, 2.0 / 15.0, 4.0 / 315.0, 2.0 / 2835.0, 4.0 / 155925.0),
    "zeta_rem": _trig_remainder(1.0),
}

SPHERE_TARGET = {
    "name": "sphere",
    "description": "Round sphere, g(rho) = sin(rho)",
    "g": np.sin,
    "dg": np.cos,
    "d2g": lambda s: -np.sin(s),
    "f": lambda s: 0.5 * np.sin(2.0 * np.asarray(s, dtype=float)),
    "wp": lambda s: 2.0 * np.square(np.sin(0.5 * np.asarray(s, dtype=float))),
    "zeta_series": (-2.0 / 3.0, 2.0 / 15.0, -4.0 / 315.0, 2.0 / 2835.0, -4.0 / 155925.0),
    "zeta_rem": _trig_remainder(-1.0),
}

TARGET_KINDS = ("flat", "hyperbolic", "sphere", "custom")


def get_target_config(kind: str):
    """Get the configuration for the specified built-in target kind."""
    logger.debug(f"get_target_config called with kind: '{kind}'")

    if kind == "flat":
        return FLAT_TARGET
    elif kind == "hyperbolic":
        return HYPERBOLIC_TARGET
    elif kind == "sphere":
        return SPHERE_TARGET
    elif kind == "custom":
        raise ValidationError("Custom targets are built from polynomial coefficients, not looked up.",
                              ["target.kind 'custom' needs target.params.coefficients"])
    else:
        raise ValidationError(f"Unknown target kind '{kind}'.",
                              [f"target.kind must be one of {', '.join(TARGET_KINDS)}"])
