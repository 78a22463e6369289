"""Standard normal CDF and quantile, implemented without libm special
functions so results are identical across platforms.

The CDF uses the Zelen & Severo rational approximation (Abramowitz & Stegun
26.2.17), whose absolute error is below 7.5e-8.  The quantile is a bisection
inversion of that CDF, reflected about 0.5 so that
``quantile(1 - p) == -quantile(p)`` holds exactly.
"""

from __future__ import annotations

import math

import numpy as np

_P = 0.2316419
_B1 = 0.319381530
_B2 = -0.356563782
_B3 = 1.781477937
_B4 = -1.821255978
_B5 = 1.330274429
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _cdf_upper(x: float) -> float:
    """CDF for x >= 0."""
    t = 1.0 / (1.0 + _P * x)
    poly = t * (_B1 + t * (_B2 + t * (_B3 + t * (_B4 + t * _B5))))
    return 1.0 - _INV_SQRT_2PI * math.exp(-0.5 * x * x) * poly


def normal_cdf(x: float) -> float:
    """P(N(0,1) <= x), absolute error <= 7.5e-8."""
    if x >= 0.0:
        return _cdf_upper(x)
    return 1.0 - _cdf_upper(-x)


def normal_cdf_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _P * ax)
    poly = t * (_B1 + t * (_B2 + t * (_B3 + t * (_B4 + t * _B5))))
    upper = 1.0 - _INV_SQRT_2PI * np.exp(-0.5 * ax * ax) * poly
    return np.where(x >= 0.0, upper, 1.0 - upper)


def _quantile_upper(p: float) -> float:
    """Bisection solve of normal_cdf(x) = p for p in [0.5, 1)."""
    lo, hi = 0.0, 13.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _cdf_upper(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_quantile(p: float) -> float:
    """Inverse CDF on (0, 1); antisymmetric about p = 0.5 by construction."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile requires p in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return _quantile_upper(p)
    return -_quantile_upper(1.0 - p)
