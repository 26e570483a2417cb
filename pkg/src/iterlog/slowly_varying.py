"""Positive, nondecreasing, slowly varying normalizers.

Only closed-form families are admitted so that positivity, the floor at 1
and monotonicity can be verified at construction time.  The families are

    const:V        constant V >= 1
    one_vee_log    max(1, log n)
    log_pow:B      max(1, log(n)**B) with B >= 0
    ilog_pow:P     max(1, loglog(n)**P) with P >= 0

Each spec parses from / formats to the small text form above, used in
experiment config files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SlowlyVaryingSpec",
    "EllStarAccumulator",
    "PotterReport",
    "eval_ell",
    "ell_star",
    "potter_check",
    "parse_ell",
    "format_ell",
]

_FAMILIES = ("const", "one_vee_log", "log_pow", "ilog_pow")

# chunk length for streaming partial sums; results do not depend on it
_CHUNK = 1 << 22


@dataclass(frozen=True)
class SlowlyVaryingSpec:
    """Closed-form slowly varying function, >= 1 and nondecreasing on n >= 1."""

    family: str
    param: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown slowly varying family {self.family!r}")
        p = float(self.param)
        if self.family == "const" and p < 1.0:
            raise ValueError("const family needs value >= 1 to keep the floor")
        if self.family in ("log_pow", "ilog_pow") and p < 0.0:
            raise ValueError("log_pow/ilog_pow need a nonnegative exponent")
        if not math.isfinite(p):
            raise ValueError("family parameter must be finite")

    # -- evaluation ---------------------------------------------------------

    def __call__(self, n):
        return eval_ell(self, n)

    def eval_real(self, x):
        """Evaluate the closed form at real x >= 1 (used by integral bounds)."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < 1.0):
            raise ValueError("slowly varying functions are evaluated at x >= 1")
        if self.family == "const":
            return np.full_like(x, self.param)
        logx = np.log(x)
        if self.family == "one_vee_log":
            return np.maximum(1.0, logx)
        if self.family == "log_pow":
            with np.errstate(divide="ignore", invalid="ignore"):
                val = np.where(logx > 0.0, logx, 1.0) ** self.param
            return np.maximum(1.0, val)
        # ilog_pow: loglog is only positive beyond e**e; clamp below
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = np.where(logx > 1.0, np.log(np.where(logx > 1.0, logx, 2.0)), 0.0)
            val = np.where(inner > 0.0, inner**self.param, 1.0)
        return np.maximum(1.0, val)


def eval_ell(spec: SlowlyVaryingSpec, n):
    """ell(n) for integer n >= 1; scalar or ndarray, always float64."""
    arr = np.asarray(n)
    if np.any(arr < 1):
        raise ValueError("eval_ell requires n >= 1")
    out = spec.eval_real(arr.astype(np.float64))
    if np.isscalar(n) or arr.ndim == 0:
        return float(out)
    return out


class EllStarAccumulator:
    """Running value of sum_{j<=n} 1/(j ell(j)) with compensated accumulation.

    Per-chunk sums use numpy pairwise summation; chunk totals are kept and
    combined with math.fsum, so the value agrees across chunkings to well
    below 1e-12 relative error.  extend() is amortized constant work per term.
    """

    def __init__(self, spec: SlowlyVaryingSpec):
        self.spec = spec
        self.n = 0
        self._chunk_sums: list[float] = []

    def extend(self, n: int) -> float:
        if n < self.n:
            raise ValueError("accumulator can only be extended forward")
        while self.n < n:
            lo = self.n + 1
            hi = min(n, self.n + _CHUNK)
            j = np.arange(lo, hi + 1, dtype=np.float64)
            self._chunk_sums.append(float(np.sum(1.0 / (j * self.spec.eval_real(j)))))
            self.n = hi
        return self.value

    @property
    def value(self) -> float:
        return math.fsum(self._chunk_sums)


def ell_star(spec: SlowlyVaryingSpec, n: int) -> float:
    """Partial sum sum_{j=1}^{n} 1/(j ell(j))."""
    if n < 1:
        raise ValueError("ell_star requires n >= 1")
    acc = EllStarAccumulator(spec)
    return acc.extend(int(n))


@dataclass(frozen=True)
class PotterReport:
    """Worst-case ratio ell(y)/ell(x) against the polynomial envelope."""

    delta: float
    bound: float
    max_ratio: float
    argmax: tuple[int, int]
    passes: bool


def potter_check(spec: SlowlyVaryingSpec, delta: float, grid, bound: float = 2.0) -> PotterReport:
    """Check ell(y)/ell(x) <= bound * max((y/x)**delta, (x/y)**delta) over grid pairs."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    pairs = list(grid)
    if not pairs:
        raise ValueError("potter_check needs a nonempty grid of pairs")
    xs = np.array([p[0] for p in pairs], dtype=np.float64)
    ys = np.array([p[1] for p in pairs], dtype=np.float64)
    if np.any(xs < 2) or np.any(ys < 2):
        raise ValueError("grid entries must be >= 2")
    envelope = np.maximum((ys / xs) ** delta, (xs / ys) ** delta)
    ratio = (spec.eval_real(ys) / spec.eval_real(xs)) / envelope
    i = int(np.argmax(ratio))
    return PotterReport(
        delta=delta,
        bound=bound,
        max_ratio=float(ratio[i]),
        argmax=(int(xs[i]), int(ys[i])),
        passes=bool(ratio[i] <= bound),
    )


# -- text form ---------------------------------------------------------------


def parse_ell(text: str) -> SlowlyVaryingSpec:
    """Parse the config text form, e.g. 'one_vee_log', 'log_pow:2.5', 'const:1'."""
    body = text.strip().strip('"')
    name, _, arg = body.partition(":")
    name = name.strip()
    if name == "one_vee_log":
        if arg:
            raise ValueError("one_vee_log takes no parameter")
        return SlowlyVaryingSpec("one_vee_log")
    if name in ("const", "log_pow", "ilog_pow"):
        if not arg:
            raise ValueError(f"{name} needs a numeric parameter, e.g. '{name}:2.5'")
        return SlowlyVaryingSpec(name, float(arg))
    raise ValueError(f"unknown ell spec {text!r}")


def format_ell(spec: SlowlyVaryingSpec) -> str:
    if spec.family == "one_vee_log":
        return "one_vee_log"
    return f"{spec.family}:{spec.param:g}"
