"""Function representations the transfer operators act on.

Finite chains use plain vectors.  The doubling-map shift works on exact
piecewise-linear functions over [0, 1): the two-branch average maps the
class to itself with dyadic breakpoint arithmetic that is exact in binary
floating point.  Linear processes use linear functionals of the innovation
tail, where the operator action is a coefficient shift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["PiecewiseLinear", "LinearFunctional", "ConstFn", "AFFINE_G", "INDICATOR_G"]

_MAX_SEGMENTS = 1 << 21


class PiecewiseLinear:
    """f(w) = slopes[i] w + intercepts[i] on [xs[i], xs[i+1]), w in [0, 1).

    Segments are half-open; evaluation at w = 1.0 uses the last segment.
    Jumps at breakpoints are allowed (the cutoff indicator lives here).
    """

    __slots__ = ("xs", "slopes", "intercepts")

    def __init__(self, xs, slopes, intercepts):
        self.xs = np.asarray(xs, dtype=np.float64)
        self.slopes = np.asarray(slopes, dtype=np.float64)
        self.intercepts = np.asarray(intercepts, dtype=np.float64)
        if self.xs[0] != 0.0 or self.xs[-1] != 1.0 or np.any(np.diff(self.xs) <= 0):
            raise ValueError("breakpoints must increase strictly from 0.0 to 1.0")
        if len(self.slopes) != len(self.xs) - 1 or len(self.intercepts) != len(self.xs) - 1:
            raise ValueError("need one (slope, intercept) pair per segment")

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls([0.0, 1.0], [0.0], [float(value)])

    def __call__(self, w):
        w = np.asarray(w, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.xs, w, side="right") - 1, 0, len(self.slopes) - 1)
        out = self.slopes[idx] * w + self.intercepts[idx]
        return float(out) if out.ndim == 0 else out

    # -- exact integrals ------------------------------------------------------

    def integral(self) -> float:
        a, b = self.xs[:-1], self.xs[1:]
        return float(np.sum(0.5 * self.slopes * (b * b - a * a) + self.intercepts * (b - a)))

    def moment2(self) -> float:
        """integral of f^2 over [0, 1] (piecewise quadratic, exact)."""
        a, b = self.xs[:-1], self.xs[1:]
        s, c = self.slopes, self.intercepts
        return float(
            np.sum(s * s * (b**3 - a**3) / 3.0 + s * c * (b * b - a * a) + c * c * (b - a))
        )

    def sup_abs(self) -> float:
        a, b = self.xs[:-1], self.xs[1:]
        return float(np.max(np.maximum(np.abs(self.slopes * a + self.intercepts),
                                       np.abs(self.slopes * b + self.intercepts))))

    # -- algebra ---------------------------------------------------------------

    def _segment_at(self, w: float) -> int:
        return int(np.clip(np.searchsorted(self.xs, w, side="right") - 1, 0, len(self.slopes) - 1))

    def _combine(self, other: "PiecewiseLinear", cs: float, co: float) -> "PiecewiseLinear":
        xs = np.union1d(self.xs, other.xs)
        mid = 0.5 * (xs[:-1] + xs[1:])
        ia = np.clip(np.searchsorted(self.xs, mid, side="right") - 1, 0, len(self.slopes) - 1)
        ib = np.clip(np.searchsorted(other.xs, mid, side="right") - 1, 0, len(other.slopes) - 1)
        return PiecewiseLinear(
            xs,
            cs * self.slopes[ia] + co * other.slopes[ib],
            cs * self.intercepts[ia] + co * other.intercepts[ib],
        ).merged()

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, scalar: float):
        return PiecewiseLinear(self.xs, self.slopes * scalar, self.intercepts * scalar)

    __rmul__ = __mul__

    def merged(self) -> "PiecewiseLinear":
        """Drop interior breakpoints where neither slope nor intercept changes."""
        if len(self.slopes) == 1:
            return self
        same = (np.diff(self.slopes) == 0.0) & (np.diff(self.intercepts) == 0.0)
        if not np.any(same):
            return self
        keep = np.concatenate([[True], ~same, [True]])
        idx = np.flatnonzero(keep[:-1])
        return PiecewiseLinear(self.xs[keep], self.slopes[idx], self.intercepts[idx])

    def doubling_average(self) -> "PiecewiseLinear":
        """(Qf)(w) = (f(w/2) + f((1+w)/2)) / 2, exact for dyadic breakpoints."""
        left = [2.0 * x for x in self.xs if 0.0 < x < 0.5]
        right = [2.0 * x - 1.0 for x in self.xs if 0.5 < x < 1.0]
        xs = np.union1d(np.array([0.0, 1.0]), np.array(left + right, dtype=np.float64))
        if len(xs) > _MAX_SEGMENTS:
            raise RuntimeError("piecewise representation exceeded the segment budget")
        mid = 0.5 * (xs[:-1] + xs[1:])
        ia = np.clip(np.searchsorted(self.xs, mid / 2.0, side="right") - 1, 0, len(self.slopes) - 1)
        ib = np.clip(np.searchsorted(self.xs, (1.0 + mid) / 2.0, side="right") - 1, 0, len(self.slopes) - 1)
        sa, ca = self.slopes[ia], self.intercepts[ia]
        sb, cb = self.slopes[ib], self.intercepts[ib]
        return PiecewiseLinear(xs, (sa + sb) / 4.0, (ca + cb + sb / 2.0) / 2.0).merged()

    def proportion_of(self, other: "PiecewiseLinear", rtol: float = 1e-12) -> float | None:
        """lambda with self == lambda * other, or None."""
        xs = np.union1d(self.xs, other.xs)
        mid = 0.5 * (xs[:-1] + xs[1:])
        ia = np.clip(np.searchsorted(self.xs, mid, side="right") - 1, 0, len(self.slopes) - 1)
        ib = np.clip(np.searchsorted(other.xs, mid, side="right") - 1, 0, len(other.slopes) - 1)
        num = np.concatenate([self.slopes[ia], self.intercepts[ia]])
        den = np.concatenate([other.slopes[ib], other.intercepts[ib]])
        scale = float(np.max(np.abs(den)))
        if scale == 0.0:
            return None
        if np.all(np.abs(num) <= rtol * max(1.0, float(np.max(np.abs(num))))):
            if np.all(num == 0.0):
                return 0.0
        mask = np.abs(den) > rtol * scale
        if not np.any(mask):
            return None
        lam = num[mask][0] / den[mask][0]
        ok = np.allclose(num, lam * den, rtol=rtol, atol=rtol * max(scale, 1.0))
        return float(lam) if ok else None


#: g(w) = w - 1/2
AFFINE_G = PiecewiseLinear([0.0, 1.0], [1.0], [-0.5])

#: g(w) = 1[w < 1/2] - 1/2 (half-open cutoff; centered under the uniform law)
INDICATOR_G = PiecewiseLinear([0.0, 0.5, 1.0], [0.0, 0.0], [0.5, -0.5])


@dataclass(frozen=True)
class LinearFunctional:
    """value = sum_j coeffs[j] * innovation_{t-j}; operator action shifts."""

    coeffs: np.ndarray

    def shifted(self) -> "LinearFunctional":
        return LinearFunctional(np.ascontiguousarray(self.coeffs[1:]))

    def l2_norm(self, innovation_variance: float = 1.0) -> float:
        return float(np.sqrt(innovation_variance * np.sum(self.coeffs**2)))


@dataclass(frozen=True)
class ConstFn:
    value: float
