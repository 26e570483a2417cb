"""Summability checks that drive the almost-sure results.

Five checkers share one report type.  Verdicts distinguish what was proved
from what was extrapolated: ``converges_certified`` requires an analytic
tail bound; power-law fits of the summand over the last decade only ever
yield ``*_extrapolated`` verdicts (or ``inconclusive`` when the fit is
poor).  Certified divergence (integral comparison) is reported as
``diverges_extrapolated`` with an explanatory note, since the verdict set
is fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functions import ConstFn, LinearFunctional, PiecewiseLinear
from .martingale import poisson_solution
from .processes import (
    IID,
    BernoulliShift,
    FiniteMarkovChain,
    LinearProcess,
    ProcessModel,
    exact_cond_Sn,
    path_stream,
    _LAW_VARIANCE,
)
from .series import monotone_tail
from .slowly_varying import SlowlyVaryingSpec
from .streams import make_generator

__all__ = [
    "ConditionReport",
    "VSequence",
    "cond_norm_seq",
    "mw_series",
    "linear_criterion",
    "bernoulli_energy",
    "dyadic_check",
    "CONVERGES_CERTIFIED",
    "CONVERGES_EXTRAPOLATED",
    "DIVERGES_EXTRAPOLATED",
    "INCONCLUSIVE",
]

CONVERGES_CERTIFIED = "converges_certified"
CONVERGES_EXTRAPOLATED = "converges_extrapolated"
DIVERGES_EXTRAPOLATED = "diverges_extrapolated"
INCONCLUSIVE = "inconclusive"

_FIT_MARGIN = 0.01
_FIT_RESID_MAX = 0.05


@dataclass
class ConditionReport:
    condition: str
    inputs: str
    ns: np.ndarray
    partial_sums: np.ndarray
    verdict: str
    tail_exponent: float | None = None
    tail_fit_residual: float | None = None
    certified_tail_bound: float | None = None
    notes: tuple[str, ...] = ()

    @property
    def total(self) -> float:
        return float(self.partial_sums[-1]) if len(self.partial_sums) else 0.0


@dataclass
class VSequence:
    """v_n = ||E(S_n | F_0)|| for n = 1..N with certification metadata."""

    values: np.ndarray
    mode: str
    stderr: np.ndarray | None = None
    certified_sup: float | None = None
    truncation_bound: float = 0.0


def _fit_tail(ns: np.ndarray, terms: np.ndarray) -> tuple[float | None, float | None]:
    """Power-law fit of the summand over the last decade of n."""
    n0 = ns[-1] / 10.0
    mask = (ns >= n0) & (terms > 0.0)
    if np.count_nonzero(mask) < 5:
        return None, None
    x = np.log(ns[mask].astype(np.float64))
    y = np.log(terms[mask])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def _extrapolated_verdict(exponent, resid) -> str:
    if exponent is None or resid is None or resid > _FIT_RESID_MAX:
        return INCONCLUSIVE
    if exponent <= -1.0 - _FIT_MARGIN:
        return CONVERGES_EXTRAPOLATED
    return DIVERGES_EXTRAPOLATED


# -- v_n sequences -----------------------------------------------------------------


def cond_norm_seq(
    model: ProcessModel,
    N: int,
    mode: str = "exact",
    *,
    seed: int = 0,
    outer: int = 200,
    inner: int = 200,
) -> VSequence:
    """v_n = ||E(S_n | F_0)||_{L2} for n = 1..N.

    Exact mode covers i.i.d. (zero), finite chains (cumulative operator
    iteration, with a certified sup over all n), linear processes (the
    coefficient-window formula) and doubling-map functionals within the
    exact budget.  Monte Carlo mode uses the nested conditional estimator
    with delta-method standard errors.
    """
    if N < 1:
        raise ValueError("need N >= 1")
    if mode == "exact":
        if isinstance(model, IID):
            return VSequence(np.zeros(N), "exact", certified_sup=0.0)
        if isinstance(model, FiniteMarkovChain):
            v = np.empty(N)
            acc = np.zeros(model.m)
            y = model.g.copy()
            for n in range(N):
                y = model.P @ y
                acc += y
                v[n] = math.sqrt(float(model.pi @ acc**2))
            u = poisson_solution(model) - model.g  # sum_{k>=1} P^k g
            p_tail = u.copy()
            for _ in range(N):
                p_tail = model.P @ p_tail
            sup = max(
                float(np.max(v)),
                math.sqrt(float(model.pi @ u**2)) + math.sqrt(float(model.pi @ p_tail**2)),
            )
            return VSequence(v, "exact", certified_sup=sup)
        if isinstance(model, LinearProcess):
            a = model.a
            C = np.concatenate([[0.0], np.cumsum(a)])
            var = _LAW_VARIANCE[model.law]
            v = np.empty(N)
            j = np.arange(model.J + 1)
            for n in range(1, N + 1):
                upper = np.minimum(j + n, model.J) + 1
                s = C[upper] - C[j + 1]
                v[n - 1] = math.sqrt(var * float(np.sum(s * s)))
            tails = np.cumsum(np.abs(a[::-1]))[::-1]  # tails[j] = sum_{i>=j} |a_i|
            sup_bound = math.sqrt(var * float(np.sum(tails[1:] ** 2))) + math.sqrt(model.tail_sq)
            return VSequence(v, "exact", certified_sup=sup_bound,
                             truncation_bound=N * math.sqrt(model.tail_sq))
        if isinstance(model, BernoulliShift):
            v = np.empty(N)
            acc = PiecewiseLinear.constant(0.0)
            y = model.g
            for n in range(N):
                y = y.doubling_average()
                acc = acc + y
                v[n] = math.sqrt(acc.moment2())
            return VSequence(v, "exact", certified_sup=None)
        raise TypeError(f"not a process model: {model!r}")

    if mode != "monte_carlo":
        raise ValueError("mode must be 'exact' or 'monte_carlo'")
    if not isinstance(model, (FiniteMarkovChain, BernoulliShift)):
        raise ValueError("monte_carlo mode needs a state-conditioned family")
    rng = make_generator(seed, 9, 0)
    sq_means = np.empty((outer, N))
    inner_vars = np.empty((outer, N))
    for o in range(outer):
        if isinstance(model, FiniteMarkovChain):
            start = int(np.searchsorted(model.cdf_pi, rng.random(), side="right"))
        else:
            start = float(rng.random())
        sums = np.empty((inner, N))
        for b in range(inner):
            stream = path_stream(model, seed, key=(9, 1, o, b), start=start)
            x, _, _ = stream.take(N)
            sums[b] = np.cumsum(x)
        m = sums.mean(axis=0)
        s2 = sums.var(axis=0, ddof=1) / inner
        sq_means[o] = m * m - s2  # unbiased for (E[S_n | W_0])^2
        inner_vars[o] = s2
    v2 = sq_means.mean(axis=0)
    se_v2 = sq_means.std(axis=0, ddof=1) / math.sqrt(outer)
    v = np.sqrt(np.maximum(v2, 0.0))
    stderr = np.where(v > 0, se_v2 / np.maximum(2.0 * v, 1e-12), np.sqrt(se_v2))
    return VSequence(v, "monte_carlo", stderr=stderr)


# -- the two weighted series --------------------------------------------------------


def _weighted_report(
    cond: str,
    inputs: str,
    v: np.ndarray,
    weight,
    weight_fn,
    v_sup: float | None,
    notes: tuple[str, ...] = (),
) -> ConditionReport:
    N = len(v)
    ns = np.arange(1, N + 1, dtype=np.float64)
    terms = weight(ns) * v
    partial = np.cumsum(terms)
    if v_sup is not None and N >= 16:
        if v_sup == 0.0:
            return ConditionReport(cond, inputs, ns, partial, CONVERGES_CERTIFIED,
                                   certified_tail_bound=0.0, notes=notes)
        est, bound = monotone_tail(weight_fn, N)
        tail = v_sup * (est + bound)
        return ConditionReport(cond, inputs, ns, partial, CONVERGES_CERTIFIED,
                               certified_tail_bound=tail,
                               notes=notes + (f"v_n <= {v_sup:g} for all n",))
    expo, resid = _fit_tail(ns, terms)
    verdict = _extrapolated_verdict(expo, resid)
    return ConditionReport(cond, inputs, ns, partial, verdict,
                           tail_exponent=expo, tail_fit_residual=resid, notes=notes)


def mw_series(
    v: VSequence | np.ndarray,
    ell: SlowlyVaryingSpec,
    *,
    v_sup: float | None = None,
    inputs: str = "",
) -> tuple[ConditionReport, ConditionReport]:
    """Partial sums of sum n^{-3/2} v_n and sum n^{-3/2} sqrt(ell(n)) log(n) v_n."""
    if isinstance(v, VSequence):
        values = v.values
        if v_sup is None:
            v_sup = v.certified_sup
    else:
        values = np.asarray(v, dtype=np.float64)
    if np.any(values < 0):
        raise ValueError("v must be nonnegative")

    def w2(x):
        return x**-1.5

    def w5(x):
        return x**-1.5 * np.sqrt(ell.eval_real(x)) * np.log(np.maximum(x, 1.0))

    base = _weighted_report("MW2", inputs, values, w2, w2, v_sup)
    strong = _weighted_report("ZW5", inputs, values, w5, w5, v_sup)
    return base, strong


def linear_criterion(L: SlowlyVaryingSpec, alpha: float, N: int) -> ConditionReport:
    """Partial sums of sum_{n>=2} log(n)^alpha / (n L(n)); certified for the
    built-in families by integral comparison."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    ns = np.arange(2, N + 1, dtype=np.float64)
    terms = np.log(ns) ** alpha / (ns * L.eval_real(ns))
    partial = np.cumsum(terms)
    inputs = f"L={L.family}:{L.param:g}, alpha={alpha:g}"

    beta = {"const": 0.0, "one_vee_log": 1.0, "log_pow": L.param, "ilog_pow": 0.0}[L.family]
    if beta - alpha > 1.0:
        # for x >= 3 the summand is log(x)^(alpha-beta) / x (up to the const
        # family scale), so the integral tail has the closed antiderivative
        # log(x)^(alpha-beta+1) / (alpha-beta+1)
        p = alpha - beta + 1.0
        scale = 1.0 / L.param if L.family == "const" else 1.0

        def F(x):  # integral_x^inf of the summand
            return scale * math.log(x) ** p / (-p)

        upper, lower = F(float(N)), F(float(N + 1))
        tail = 0.5 * (upper + lower) + 0.5 * (upper - lower)
        return ConditionReport("LIN21", inputs, ns, partial, CONVERGES_CERTIFIED,
                               certified_tail_bound=tail,
                               notes=(f"integral comparison: exponent gap {beta - alpha:g} > 1",))
    note = (
        "analytic divergence by integral comparison "
        f"(log-exponent gap {beta - alpha:g} <= 1)",
    )
    return ConditionReport("LIN21", inputs, ns, partial, DIVERGES_EXTRAPOLATED, notes=note)


# -- doubling-map energy integral -----------------------------------------------------


def _log_weight(u: np.ndarray, delta: float) -> np.ndarray:
    """(log log(1/u))^{5/2+delta}, clamped to 0 where |x-y| >= 1/e."""
    out = np.zeros_like(u)
    small = u < math.exp(-1.0)
    inner = np.log(np.log(1.0 / u[small]))
    out[small] = np.maximum(inner, 0.0) ** (2.5 + delta)
    return out


def _shift_diff_sq_integral(g: PiecewiseLinear, u: float) -> float:
    """integral_0^{1-u} (g(y+u) - g(y))^2 dy, exact for piecewise-linear g."""
    cuts = np.union1d(g.xs, np.clip(g.xs - u, 0.0, 1.0 - u))
    cuts = cuts[(cuts >= 0.0) & (cuts <= 1.0 - u)]
    cuts = np.union1d(cuts, [0.0, 1.0 - u])
    a, b = cuts[:-1], cuts[1:]
    mid = 0.5 * (a + b)
    i1 = np.clip(np.searchsorted(g.xs, mid + u, side="right") - 1, 0, len(g.slopes) - 1)
    i0 = np.clip(np.searchsorted(g.xs, mid, side="right") - 1, 0, len(g.slopes) - 1)
    ds = g.slopes[i1] - g.slopes[i0]
    dc = (g.slopes[i1] * u + g.intercepts[i1]) - g.intercepts[i0]
    # integral of (ds*y + dc)^2 over [a, b]
    return float(np.sum(ds**2 * (b**3 - a**3) / 3.0 + ds * dc * (b * b - a * a) + dc * dc * (b - a)))


def bernoulli_energy(g, delta: float, quadrature_level: int = 24) -> ConditionReport:
    """Double integral of (g(x)-g(y))^2/|x-y| times the iterated-log weight.

    Decomposed over diagonal strips |x-y| in [2^{-(m+1)}, 2^{-m}]; each
    strip uses Gauss-Legendre in the offset with the inner integral exact.
    For piecewise-linear g a Lipschitz/jump bound certifies the remaining
    strips, so the verdict is certified.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if isinstance(g, str):
        from .processes import bernoulli_shift

        g = bernoulli_shift(g).g
    nodes, weights = np.polynomial.legendre.leggauss(32)
    strip_vals = np.empty(quadrature_level + 1)
    for m in range(quadrature_level + 1):
        lo, hi = 2.0 ** -(m + 1), 2.0**-m
        u = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * weights
        phi = np.array([_shift_diff_sq_integral(g, float(uu)) for uu in u])
        strip_vals[m] = float(np.sum(w * 2.0 * _log_weight(u, delta) / u * phi))
    partial = np.cumsum(strip_vals)

    # certified remainder: phi(u) <= 2 Lip^2 u^2 + 2 u sum(jumps^2)
    lip = float(np.max(np.abs(g.slopes)))
    edge_vals = g.slopes[:-1] * g.xs[1:-1] + g.intercepts[:-1]
    edge_vals_r = g.slopes[1:] * g.xs[1:-1] + g.intercepts[1:]
    jump_sq = float(np.sum((edge_vals_r - edge_vals) ** 2))
    rem = 0.0
    for m in range(quadrature_level + 1, quadrature_level + 600):
        hi = 2.0**-m
        wmax = float(_log_weight(np.array([2.0 ** -(m + 1)]), delta)[0])
        rem += 2.0 * wmax * (2.0 * lip**2 * hi**2 + 2.0 * jump_sq * hi)
    ms = np.arange(quadrature_level + 1, dtype=np.float64)
    notes = ("weight clamped to 0 on |x-y| >= 1/e",
             f"remainder over deeper strips <= {rem:.3e}")
    return ConditionReport("BSHIFT22", f"delta={delta:g}", ms, partial,
                           CONVERGES_CERTIFIED, certified_tail_bound=rem, notes=notes)


# -- dyadic route ----------------------------------------------------------------------


def dyadic_check(
    v_dyadic: np.ndarray,
    weight_exponent: float = 1.5,
    *,
    full_v: np.ndarray | None = None,
    v_sup: float | None = None,
    subadditivity_tol: float = 1e-10,
) -> ConditionReport:
    """sum_r h(2^r) v_{2^r} 2^{-r/2} with h(x) = (1 v log x)^{weight_exponent}.

    When the underlying full sequence is supplied its subadditivity is
    checked on all tested pairs (aborts on violation).  A certified sup on
    v gives a certified verdict; otherwise the terms are fitted by a power
    law in r.  The implied bound on the full sum sum_n h(n) v_n n^{-3/2}
    (subadditive dyadic interpolation, constant 2) is attached as a note.
    """
    v = np.asarray(v_dyadic, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("v must be nonnegative")
    if full_v is not None:
        fv = np.asarray(full_v, dtype=np.float64)
        nmax = len(fv)
        rng = np.random.default_rng(1)
        for _ in range(200):
            m = int(rng.integers(1, nmax))
            n = int(rng.integers(1, nmax - m + 1)) if nmax - m >= 1 else 1
            if m + n <= nmax and fv[m + n - 1] > fv[m - 1] + fv[n - 1] + subadditivity_tol:
                raise ValueError(
                    f"subadditivity violated at (m, n) = ({m}, {n}): "
                    f"{fv[m + n - 1]:.6g} > {fv[m - 1]:.6g} + {fv[n - 1]:.6g}"
                )
    r = np.arange(len(v), dtype=np.float64)
    h = np.maximum(1.0, r * math.log(2.0)) ** weight_exponent
    terms = h * v * 2.0 ** (-r / 2.0)
    partial = np.cumsum(terms)
    h_next = np.maximum(1.0, (r + 1.0) * math.log(2.0)) ** weight_exponent
    majorant = 2.0 * float(np.sum(h_next * v * 2.0 ** (-r / 2.0)))
    notes = (f"implied full-sum majorant (constant 2): {majorant:.6g}",)

    if v_sup is not None:
        R = len(v) - 1

        def f(x):
            return np.maximum(1.0, x * math.log(2.0)) ** weight_exponent * 2.0 ** (-x / 2.0)

        est, bound = monotone_tail(f, R)
        tail = v_sup * (est + bound)
        return ConditionReport("DYADIC", f"weight_exponent={weight_exponent:g}", r, partial,
                               CONVERGES_CERTIFIED, certified_tail_bound=tail, notes=notes)

    if np.all(terms == 0.0):
        return ConditionReport("DYADIC", f"weight_exponent={weight_exponent:g}", r, partial,
                               CONVERGES_CERTIFIED, certified_tail_bound=0.0, notes=notes)
    # fit in r, not n: the summand of the dyadic series is a power of r
    expo, resid = _fit_tail(np.maximum(r, 1.0), terms)
    verdict = _extrapolated_verdict(expo, resid)
    return ConditionReport("DYADIC", f"weight_exponent={weight_exponent:g}", r, partial, verdict,
                           tail_exponent=expo, tail_fit_residual=resid, notes=notes)
