"""Certified tail estimates for slowly convergent series.

Two helpers cover everything the coefficient machinery needs:

* ``monotone_tail`` brackets ``sum_{n>m} f(n)`` for positive decreasing f
  between the integrals over [m+1, inf) and [m, inf); the midpoint is the
  estimate and the half-width (plus quadrature error) the certified bound.

* ``oscillatory_tail`` handles ``sum_{n>K} a_n exp(i n t)`` for a smooth,
  eventually completely monotone envelope ``a``.  Repeated summation by
  parts against the geometric kernel gives the expansion

      T(K) = -exp(iKt) * sum_{m=0}^{M-1} phi**(m+1) * (D^m a)_{K+1} + rem,

  with phi = exp(it)/(exp(it)-1) and D the forward decrement
  (D a)_n = a_n - a_{n+1}.  When (D^M a) is positive and decreasing the
  remainder obeys |rem| <= 2 |phi|**(M+1) (D^M a)_{K+1}.  Each extra order
  shrinks the remainder by roughly 1/(K|t|), so summing a few tens of
  periods directly is enough for near-machine accuracy.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.integrate import quad

__all__ = ["improper_integral", "monotone_tail", "oscillatory_tail"]


def improper_integral(f, a: float) -> tuple[float, float]:
    """integral_a^inf f(x) dx via the substitution x = a/w^2 on (0, 1].

    Returns (value, quadrature error estimate).  Direct quad(..., inf) can
    silently underestimate log-modulated power tails; the quadratic
    substitution leaves at most logarithmic endpoint behavior for the
    x^{-3/2}-type integrands used here.
    """
    if a <= 0:
        raise ValueError("lower limit must be positive")

    def g(w):
        x = a / (w * w)
        return 2.0 * a * f(x) / (w * w * w)

    val, err = quad(g, 0.0, 1.0, limit=200)
    return val, err


def monotone_tail(f, m: int) -> tuple[float, float]:
    """(estimate, bound) for sum_{n>m} f(n), f positive and decreasing on [m, inf)."""
    upper, e1 = improper_integral(f, float(m))
    cell, e2 = quad(f, float(m), float(m) + 1.0)
    lower = upper - cell
    est = 0.5 * (upper + lower)
    bound = 0.5 * (upper - lower) + e1 + e2
    return est, abs(bound)


def oscillatory_tail(window: np.ndarray, t: float, K: int, depth: int = 4) -> tuple[complex, float]:
    """(estimate, bound) for sum_{n>K} a_n exp(i n t).

    ``window`` holds a_{K+1}, a_{K+2}, ... (at least depth+2 values).  The
    expansion order drops automatically to the largest m for which the m-th
    decrement stays positive and nonincreasing over the window; order 0
    falls back to the plain Dirichlet bound 2|phi| a_{K+1}.
    """
    if t == 0.0 or abs(t) > math.pi + 1e-12:
        raise ValueError("need 0 < |t| <= pi")
    w = np.asarray(window, dtype=np.float64)
    if w.size < depth + 2:
        raise ValueError(f"window of {w.size} values too short for depth {depth}")
    eit = cmath.exp(1j * t)
    phi = eit / (eit - 1.0)
    abs_phi = abs(phi)

    diffs = [w]
    order = 0
    for m in range(1, depth + 1):
        d = -np.diff(diffs[-1])
        if d.size < 2 or np.any(d <= 0.0) or np.any(np.diff(d) > 0.0):
            break
        diffs.append(d)
        order = m

    phase = cmath.exp(1j * t * K)
    est = 0.0 + 0.0j
    p = phi
    for m in range(order):
        est -= phase * p * float(diffs[m][0])
        p *= phi
    bound = 2.0 * abs_phi ** (order + 1) * float(diffs[order][0])
    return est, bound
