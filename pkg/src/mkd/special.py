"""Regularised incomplete gamma function and chi-squared quantiles."""

from __future__ import annotations

import math

from .errors import DomainError

__all__ = ["chi2_cdf", "chi2_quantile", "gammainc_lower"]

_EPS = 1e-16
_TINY = 1e-300
_MAXITER = 10_000


def _series(a, x):
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAXITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _continued_fraction(a, x):
    # modified Lentz evaluation of the upper-tail fraction
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAXITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a: float, x: float) -> float:
    """Regularised lower incomplete gamma ``P(a, x)``; series below ``a + 1``, continued fraction above."""
    if a <= 0:
        raise DomainError(f"shape must be positive, got {a}")
    if x < 0:
        raise DomainError(f"argument must be non-negative, got {x}")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return min(_series(a, x), 1.0)
    return max(1.0 - _continued_fraction(a, x), 0.0)


def chi2_cdf(x: float, df: int) -> float:
    if x <= 0:
        return 0.0
    return gammainc_lower(0.5 * df, 0.5 * x)


def chi2_quantile(df: int, gamma: float) -> float:
    """``x`` with ``F_{chi2_df}(x) = gamma``, found by bisection on :func:`chi2_cdf`."""
    if int(df) != df or df < 1:
        raise DomainError(f"degrees of freedom must be a positive integer, got {df}")
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"level must lie strictly between 0 and 1, got {gamma}")
    lo, hi = 0.0, max(1.0, float(df))
    while chi2_cdf(hi, df) < gamma:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if chi2_cdf(mid, df) < gamma:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
