"""Sequential inner loops, JIT-compiled when numba is available.

The doubling-map state recursion and general Markov stepping are inherently
sequential; everything else in the package is vectorized.  The fallbacks
produce bit-identical results, only slower.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def bshift_path(w0: float, bits: np.ndarray, out: np.ndarray) -> float:
    """w_{k+1} = (w_k + bit) * 0.5, one IEEE double op pair per step."""
    w = w0
    for i in range(bits.size):
        w = (w + bits[i]) * 0.5
        out[i] = w
    return w


@njit(cache=True)
def markov_path(cdf: np.ndarray, u: np.ndarray, w0: int, out: np.ndarray) -> int:
    """States driven by precomputed uniforms; cdf rows are cumulative P rows."""
    m = cdf.shape[1]
    w = w0
    for i in range(u.size):
        x = u[i]
        row = cdf[w]
        s = 0
        while s < m - 1 and row[s] <= x:
            s += 1
        w = s
        out[i] = w
    return w


if not HAVE_NUMBA:  # keep plain-python fallbacks importable under the same names

    def bshift_path(w0, bits, out):  # noqa: F811
        w = float(w0)
        b = bits.tolist()
        o = [0.0] * len(b)
        for i, bi in enumerate(b):
            w = (w + bi) * 0.5
            o[i] = w
        out[:] = o
        return w

    def markov_path(cdf, u, w0, out):  # noqa: F811
        m = cdf.shape[1]
        w = int(w0)
        rows = [cdf[i] for i in range(cdf.shape[0])]
        for i, x in enumerate(u.tolist()):
            row = rows[w]
            s = 0
            while s < m - 1 and row[s] <= x:
                s += 1
            w = s
            out[i] = w
        return w
