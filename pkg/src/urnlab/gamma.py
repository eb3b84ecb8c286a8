"""Complex log-gamma helpers on top of :func:`scipy.special.loggamma`."""

from __future__ import annotations

import cmath

import numpy as np
from scipy import special


def is_pole(z: complex, tol: float = 1e-12) -> bool:
    """True if ``z`` is (numerically) a non-positive integer."""
    z = complex(z)
    if abs(z.imag) > tol or z.real > tol:
        return False
    return abs(z.real - round(z.real)) <= tol * max(1.0, abs(z.real))


def loggamma(z: complex) -> complex:
    """Principal branch of ``log Gamma(z)``; poles raise ``ValueError``."""
    z = complex(z)
    if is_pole(z):
        raise ValueError(f"Gamma has a pole at {z.real:g}")
    return complex(special.loggamma(z))


def gamma(z: complex) -> complex:
    return cmath.exp(loggamma(z))


def gamma_ratio(a: complex, b: complex) -> complex:
    """``Gamma(a) / Gamma(b)`` evaluated in log space."""
    return cmath.exp(loggamma(a) - loggamma(b))


loggamma_vec = np.vectorize(loggamma, otypes=[complex])
