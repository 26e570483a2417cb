"""Filter coefficients and boundary Fourier sums.

The weight sequence is

    beta_k = (c / k) * sum_{n>=k} 1 / sqrt(n^3 ell(n)),

with c normalized so the beta sum to one; the inverse-series coefficients
alpha_n satisfy alpha_0 = 1, alpha_n = sum_{k<=n} beta_k alpha_{n-k}.  All
infinite sums carry certified tail estimates from :mod:`iterlog.series`.

Fourier boundary values b(t) = sum beta_k e^{ikt} are summed to
K(t) = ceil(40/|t|) terms plus a summation-by-parts tail correction; the
first derivative uses the factorization b' = fourier_factor_f(t) *
fourier_factor_g(t) with fourier_factor_f(t) = e^{it}/(1-e^{it}), and the
second derivative b'' = f'g + fg'.  a(t) = 1/(1-b(t)) with derivatives by
the quotient rule and first-order error propagation.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .series import monotone_tail, oscillatory_tail
from .slowly_varying import SlowlyVaryingSpec

__all__ = [
    "CoefficientTable",
    "FourierEval",
    "normalization_constant",
    "beta_table",
    "alpha_table",
    "prop3_ratio",
    "cn_mass",
    "b_eval",
    "a_eval",
    "T_MIN",
    "FOURIER_TERM_BUDGET",
]

_EULER = 0.5772156649015328606

# below this |t| the certified Fourier summation exceeds the term budget
T_MIN = 1e-6
FOURIER_TERM_BUDGET = 1 << 23

_DIFF_WINDOW = 12  # extra sequence values kept for the tail expansion


@dataclass(frozen=True)
class CoefficientTable:
    """Coefficients up to a finite horizon with certified tail bound.

    beta[k-1] holds beta_k for k = 1..N; gamma[j-1] holds the tail sum
    gamma_j = sum_{i>=j} beta_i for j = 1..N+1; alpha[n] holds alpha_n for
    n = 0..N once filled.  tail_bound is a certified upper bound on
    sum_{k>N} beta_k.
    """

    ell: SlowlyVaryingSpec
    N: int
    c: float
    beta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray | None
    tail_bound: float


@dataclass(frozen=True)
class FourierEval:
    """Boundary evaluation with certified truncation bounds.

    truncation_error_bound bounds the error of ``value``; the derivative
    bounds are kept separately.  Derivatives are None unless requested.
    """

    t: float
    value: complex
    first_derivative: complex | None
    second_derivative: complex | None
    truncation_error_bound: float
    d1_bound: float = 0.0
    d2_bound: float = 0.0


# -- per-ell cached summation arrays -----------------------------------------

_ARRAY_CACHE: dict[tuple, dict] = {}
_C_CACHE: dict[tuple, tuple[float, float]] = {}


def _g3(ell: SlowlyVaryingSpec):
    return lambda x: 1.0 / np.sqrt(x**3 * ell.eval_real(x))


def _g1(ell: SlowlyVaryingSpec):
    return lambda x: 1.0 / np.sqrt(x * ell.eval_real(x))


def _harmonic_like(ell: SlowlyVaryingSpec):
    # continuous surrogate of H_n / sqrt(n^3 ell(n)); |H_n - surrogate| <= 1/(8 n^2)
    def f(x):
        return (np.log(x) + _EULER + 0.5 / x) / np.sqrt(x**3 * ell.eval_real(x))

    return f


def _arrays(ell: SlowlyVaryingSpec, M: int, want_h: bool = False, want_g1: bool = False) -> dict:
    """g3 values and suffix sums (tail-corrected) for n = 1..M."""
    key = (ell, M)
    entry = _ARRAY_CACHE.get(key)
    if entry is None:
        if len(_ARRAY_CACHE) > 6:
            _ARRAY_CACHE.clear()
        n = np.arange(1, M + 1, dtype=np.float64)
        g3 = 1.0 / np.sqrt(n**3 * ell.eval_real(n))
        t3, b3 = monotone_tail(_g3(ell), M)
        suffix3 = np.cumsum(g3[::-1])[::-1] + t3
        entry = {"n": n, "g3": g3, "suffix3": suffix3, "tail3": t3, "tail3_bound": b3}
        _ARRAY_CACHE[key] = entry
    if want_h and "suffixH" not in entry:
        n = entry["n"]
        H = np.cumsum(1.0 / n)
        gh = entry["g3"] * H
        tH, bH = monotone_tail(_harmonic_like(ell), M)
        # harmonic surrogate error: sum_{n>M} g3 / (8 n^2) < M^{-5/2} / 12
        bH += float(M) ** -2.5 / 12.0
        entry["H"] = H
        entry["suffixH"] = np.cumsum(gh[::-1])[::-1] + tH
        entry["tailH_bound"] = bH
    if want_g1 and "g1" not in entry:
        n = entry["n"]
        entry["g1"] = 1.0 / np.sqrt(n * ell.eval_real(n))
    return entry


# -- normalization ------------------------------------------------------------


def normalization_constant(
    ell: SlowlyVaryingSpec, tolerance: float = 1e-9, term_budget: int = 1 << 28
) -> float:
    """c with |sum_k beta_k(c) - 1| <= tolerance.

    Uses the exchange sum_k (1/k) sum_{n>=k} g3(n) = sum_n H_n g3(n), summed
    directly until the integral-comparison tail bound falls below
    tolerance/2 relative to the head.  Raises if the term budget is hit.
    """
    if not 0.0 < tolerance <= 1e-4:
        raise ValueError("tolerance must lie in (0, 1e-4]")
    key = (ell, float(tolerance))
    hit = _C_CACHE.get(key)
    if hit is not None:
        return hit[0]

    f = _harmonic_like(ell)
    chunks: list[float] = []
    H_carry = 0.0
    M = 0
    step = 1 << 16
    head = 0.0
    while True:
        n = np.arange(M + 1, M + step + 1, dtype=np.float64)
        H = H_carry + np.cumsum(1.0 / n)
        chunks.append(float(np.sum(H / np.sqrt(n**3 * ell.eval_real(n)))))
        H_carry = float(H[-1])
        M += step
        head = math.fsum(chunks)
        tail_est, tail_bound = monotone_tail(f, M)
        tail_bound += float(M) ** -2.5 / 12.0
        if tail_bound <= 0.5 * tolerance * head:
            total = head + tail_est
            c = 1.0 / total
            _C_CACHE[key] = (c, tail_bound / total)
            return c
        if M + step > term_budget:
            raise RuntimeError(
                f"normalization tail bound {tail_bound:.3e} not below "
                f"{0.5 * tolerance * head:.3e} within {term_budget} terms"
            )
        step = min(2 * step, 1 << 24)


# -- coefficient tables --------------------------------------------------------


def beta_table(ell: SlowlyVaryingSpec, N: int, tolerance: float = 1e-9) -> CoefficientTable:
    """beta_1..beta_N and gamma_1..gamma_{N+1} with certified tails."""
    if N < 1:
        raise ValueError("horizon N must be >= 1")
    c = normalization_constant(ell, tolerance)
    M = max(1 << 20, 8 * N, N + 2 * _DIFF_WINDOW)
    arr = _arrays(ell, M, want_h=True)
    k = np.arange(1, N + 1, dtype=np.float64)
    beta = c / k * arr["suffix3"][:N]

    # gamma_{N+1} = c * (sum_{n>=N+1} g3 H_n  -  H_N * sum_{n>=N+1} g3)
    HN = float(arr["H"][N - 1])
    gamma_top = c * (float(arr["suffixH"][N]) - HN * float(arr["suffix3"][N]))
    gamma = np.empty(N + 1)
    gamma[N] = gamma_top
    acc = gamma_top
    for j in range(N - 1, -1, -1):  # sequential so gamma_j == gamma_{j+1} + beta_j exactly
        acc = acc + beta[j]
        gamma[j] = acc
    tail_bound = gamma_top + c * (arr["tailH_bound"] + HN * arr["tail3_bound"])
    return CoefficientTable(ell=ell, N=N, c=c, beta=beta, gamma=gamma, alpha=None, tail_bound=tail_bound)


def alpha_table(table: CoefficientTable) -> CoefficientTable:
    """Fill alpha_0..alpha_N by the direct convolution recursion."""
    N = table.N
    beta = table.beta
    beta_rev = beta[::-1].copy()  # contiguous for the dot products
    alpha = np.empty(N + 1)
    alpha[0] = 1.0
    for n in range(1, N + 1):
        alpha[n] = np.dot(beta_rev[N - n:], alpha[:n])
    return replace(table, alpha=alpha)


def prop3_ratio(table: CoefficientTable, start: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(n, (alpha_n - alpha_{n+1}) * sqrt(n^3 / ell(n))) for start <= n <= N-1."""
    if table.alpha is None:
        raise ValueError("alpha not filled; call alpha_table first")
    n = np.arange(start, table.N, dtype=np.float64)
    d = table.alpha[start:-1] - table.alpha[start + 1:]
    return n, d * np.sqrt(n**3 / table.ell.eval_real(n))


def cn_mass(table: CoefficientTable, N: int) -> float:
    """sum_{j=0}^{N} alpha_j beta_{N+1-j} (requires beta through N+1)."""
    if table.alpha is None:
        raise ValueError("alpha not filled; call alpha_table first")
    if len(table.beta) < N + 1 or len(table.alpha) < N + 1:
        raise ValueError("table horizon too small for requested N")
    return float(np.dot(table.alpha[: N + 1], table.beta[N::-1]))


# -- boundary Fourier sums ------------------------------------------------------


def _fourier_factor_f(t: float) -> complex:
    eit = cmath.exp(1j * t)
    return eit / (1.0 - eit)


def _fourier_factor_f_prime(t: float) -> complex:
    eit = cmath.exp(1j * t)
    return 1j * eit / (1.0 - eit) ** 2


def _terms_for(t: float) -> int:
    return max(1024, int(math.ceil(40.0 / abs(t)))) if t != 0.0 else 4096


def b_eval(
    ell: SlowlyVaryingSpec,
    t: float,
    order: int = 0,
    tolerance: float = 1e-6,
    t_min: float = T_MIN,
) -> FourierEval:
    """b(t) = sum_k beta_k e^{ikt} with derivatives up to ``order``.

    Rejects 0 < |t| < t_min and any |t| whose certified summation would
    exceed the term budget.  At t = 0 only order 0 is available.
    """
    if abs(t) > math.pi + 1e-12:
        raise ValueError("need |t| <= pi")
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if t == 0.0 and order > 0:
        raise ValueError("derivatives are undefined at t = 0")
    if t != 0.0 and abs(t) < t_min:
        raise ValueError(f"|t| = {abs(t):.2e} below the certified floor {t_min:.0e}")
    K = _terms_for(t)
    if K > FOURIER_TERM_BUDGET:
        raise ValueError(f"certified summation needs {K} terms, budget is {FOURIER_TERM_BUDGET}")

    c = normalization_constant(ell, min(tolerance, 1e-9))
    M = K + 4 * _DIFF_WINDOW
    arr = _arrays(ell, M, want_g1=(order == 2))
    kk = np.arange(1, K + 1, dtype=np.float64)
    beta_all = c / np.arange(1, M + 1, dtype=np.float64) * arr["suffix3"]
    # beta error from the suffix tail estimate: sum_k (c/k) * tail3_bound
    beta_err = c * (math.log(M) + 1.0) * arr["tail3_bound"]

    if t == 0.0:
        # the series tail at t = 0 is the exchanged gamma formula
        head = float(np.sum(beta_all[:K]))
        arrh = _arrays(ell, M, want_h=True)
        HK = float(arrh["H"][K - 1])
        gamma_top = c * (float(arrh["suffixH"][K]) - HK * float(arrh["suffix3"][K]))
        value = head + gamma_top
        bound = beta_err + c * (arrh["tailH_bound"] + HK * arrh["tail3_bound"])
        return FourierEval(t=0.0, value=complex(value), first_derivative=None,
                           second_derivative=None, truncation_error_bound=bound)

    phases = np.exp(1j * t * kk)
    head = complex(np.sum(beta_all[:K] * phases))
    tail, tail_bound = oscillatory_tail(beta_all[K : K + _DIFF_WINDOW], t, K)
    value = head + tail
    value_bound = tail_bound + beta_err

    d1 = d2 = None
    d1_bound = d2_bound = 0.0
    if order >= 1:
        g3_vals = arr["g3"][:K]
        # fourier_factor_g(t) = i c sum_n (1 - e^{int}) g3(n)
        head_g = complex(np.sum((1.0 - phases) * g3_vals))
        mono = float(arr["suffix3"][K])
        osc, osc_b = oscillatory_tail(arr["g3"][K : K + _DIFF_WINDOW], t, K)
        series_g = head_g + mono - osc
        g_bound = arr["tail3_bound"] + osc_b
        f_val = _fourier_factor_f(t)
        d1 = f_val * 1j * c * series_g
        d1_bound = abs(f_val) * c * g_bound + abs(d1) * 1e-13
    if order == 2:
        g1_vals = arr["g1"][:K]
        head_gp = complex(np.sum(phases * g1_vals))
        osc2, osc2_b = oscillatory_tail(arr["g1"][K : K + _DIFF_WINDOW], t, K)
        gprime = c * (head_gp + osc2)
        gp_bound = c * osc2_b
        fp_val = _fourier_factor_f_prime(t)
        g_val = 1j * c * series_g
        d2 = fp_val * g_val + f_val * gprime
        d2_bound = abs(fp_val) * c * g_bound + abs(f_val) * gp_bound + abs(d2) * 1e-13

    return FourierEval(
        t=t,
        value=value,
        first_derivative=d1,
        second_derivative=d2,
        truncation_error_bound=value_bound,
        d1_bound=d1_bound,
        d2_bound=d2_bound,
    )


def a_eval(
    ell: SlowlyVaryingSpec,
    t: float,
    order: int = 0,
    tolerance: float = 1e-6,
    t_min: float = T_MIN,
) -> FourierEval:
    """a(t) = 1/(1 - b(t)) with derivatives, error bounds propagated first order."""
    if t == 0.0:
        raise ValueError("a(t) is undefined at t = 0")
    be = b_eval(ell, t, order=order, tolerance=tolerance, t_min=t_min)
    one_minus = 1.0 - be.value
    r = abs(one_minus)
    if r < 10.0 * be.truncation_error_bound:
        raise ValueError(
            f"|1 - b(t)| = {r:.3e} too close to the truncation bound "
            f"{be.truncation_error_bound:.3e}; no certified evaluation"
        )
    value = 1.0 / one_minus
    v_bound = be.truncation_error_bound / r**2

    d1 = d2 = None
    d1_bound = d2_bound = 0.0
    if order >= 1:
        d1 = be.first_derivative / one_minus**2
        d1_bound = (
            be.d1_bound / r**2
            + 2.0 * abs(be.first_derivative) * be.truncation_error_bound / r**3
        )
    if order == 2:
        d2 = be.second_derivative / one_minus**2 + 2.0 * be.first_derivative**2 / one_minus**3
        d2_bound = (
            be.d2_bound / r**2
            + 2.0 * abs(be.second_derivative) * be.truncation_error_bound / r**3
            + 4.0 * abs(be.first_derivative) * be.d1_bound / r**3
            + 6.0 * abs(be.first_derivative) ** 2 * be.truncation_error_bound / r**4
        )
    return FourierEval(
        t=t,
        value=value,
        first_derivative=d1,
        second_derivative=d2,
        truncation_error_bound=v_bound,
        d1_bound=d1_bound,
        d2_bound=d2_bound,
    )
