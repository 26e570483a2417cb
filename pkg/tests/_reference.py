"""Independent reference computations used as test oracles.

Everything here deliberately avoids the library's own code paths: mpmath
special functions, brute-force summation, matrix arithmetic done by hand,
and grid optimization.  Frozen digits quoted in the tests were produced by
these routines (see the inline notes for the derivations).
"""

from __future__ import annotations

import math

import numpy as np

# sum_{n>=1} H_n n^{-3/2}, from exact mpmath summation of 2e4 terms plus a
# Hurwitz-zeta tail for the expansion H_n = ln n + gamma + 1/(2n) - ...;
# c1 = 1 / that sum.  Stable to the digits shown.
S_CONST1 = 6.02330166880714421544897997269
C_CONST1 = 0.166021902103741084295817897076

# c * zeta(3/2): the k = 1 weight for the constant normalizer
BETA1_CONST1 = 0.4337115243976886


def chunked_sum(lo: int, hi: int, f, chunk: int = 10**7) -> float:
    total = []
    for a in range(lo, hi + 1, chunk):
        b = min(a + chunk - 1, hi)
        n = np.arange(a, b + 1, dtype=np.float64)
        total.append(float(np.sum(f(n))))
    return math.fsum(total)


def brute_force_b(t: float, K: int = 10**7) -> complex:
    """b(t) for the constant normalizer by direct summation of K terms.

    beta_k = (c/k) * zeta(3/2, k); the truncation error is below
    beta_{K+1} / |sin(t/2)|, tiny for moderate t.
    """
    from scipy.special import zeta

    k = np.arange(1, K + 1, dtype=np.float64)
    beta = C_CONST1 / k * zeta(1.5, k)
    return complex(np.sum(beta * np.exp(1j * t * k)))


def strassen_extreme(weights: np.ndarray, s: float = 1.0) -> float:
    """max of sum_i d_i w_i / m over the ball sum d_i^2 / m <= s^2.

    Cauchy-Schwarz gives s * sqrt(sum w_i^2 / m); used to cross-check the
    energy-ball extremal values on a discretized grid.
    """
    m = len(weights)
    return s * math.sqrt(float(np.sum(weights**2)) / m)


def chain_cov_gg(P: np.ndarray, pi: np.ndarray, g: np.ndarray, k: int) -> float:
    """E[g(W_0) g(W_k)] by plain matrix powering."""
    y = g.copy()
    for _ in range(k):
        y = P @ y
    return float(pi @ (g * y))


def ks_scipy(sample: np.ndarray, sigma: float) -> float:
    from scipy.stats import kstest, norm

    return float(kstest(sample, norm(loc=0.0, scale=sigma).cdf).statistic)
