"""Standard normal CDF and quantile kernels.

The CDF is evaluated through the complementary error function so that both
tails keep full relative precision; ``1 - cdf`` is never formed directly.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import ndtri

from latentmos.errors import InputError

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def standard_normal_cdf(z: float) -> float:
    """Phi(z) = P(Z <= z) for Z ~ N(0, 1)."""
    z = float(z)
    if not math.isfinite(z):
        raise InputError(f"standard_normal_cdf needs a finite argument, got {z!r}")
    return 0.5 * math.erfc(-z * _INV_SQRT2)


def standard_normal_sf(z: float) -> float:
    """Upper tail 1 - Phi(z), accurate for large positive z."""
    z = float(z)
    if not math.isfinite(z):
        raise InputError(f"standard_normal_sf needs a finite argument, got {z!r}")
    return 0.5 * math.erfc(z * _INV_SQRT2)


def standard_normal_ppf(p):
    """Inverse of :func:`standard_normal_cdf` for p in the open interval (0, 1).

    Accepts scalars or arrays; returns the same shape.
    """
    arr = np.asarray(p, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise InputError("standard_normal_ppf needs probabilities strictly inside (0, 1)")
    out = ndtri(arr)
    return float(out) if out.ndim == 0 else out
