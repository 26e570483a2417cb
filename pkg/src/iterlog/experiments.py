"""Long-horizon Monte Carlo experiments.

Almost-sure statements are operationalized as calibrated statistical
windows on deterministic seeded runs: peak statistics for the iterated
logarithm, the three polygonal-path functionals against the energy-ball
extremes (endpoint sigma, integral sigma/sqrt(3), supremum sigma),
Kolmogorov-Smirnov distances for the conditional CLT, and the normalized
running-max remainder.

Each replication draws its streams from (master_seed, rep, role), so
results are bit-identical regardless of worker count; aggregation is a
reduction over the rep-indexed result arrays.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .martingale import epsilon_for, poisson_resolvent, resolvent_h
from .processes import (
    IID,
    BernoulliShift,
    FiniteMarkovChain,
    LinearProcess,
    ProcessModel,
    path_stream,
    sample_path,
)
from .streams import ROLE_AUX, make_generator

__all__ = [
    "LILReport",
    "FLILReport",
    "CCLTReport",
    "RemainderGrowthReport",
    "run_lil",
    "run_flil",
    "run_cclt",
    "remainder_growth",
    "lil_denominator",
]

_CHUNK = 1 << 20
_LOGLOG3 = math.log(math.log(3.0))

# peak tracking starts where loglog n >= 1 (n >= ceil(e^e) = 16); below that
# the tiny denominator swamps the running max with transient fluctuations
# that the calibrated windows exclude
PEAK_START = 16


def lil_denominator(n) -> np.ndarray:
    """sqrt(2 n max(loglog n, loglog 3)); the guard keeps n >= 3 sane."""
    nf = np.asarray(n, dtype=np.float64)
    return np.sqrt(2.0 * nf * np.maximum(np.log(np.log(np.maximum(nf, 3.0))), _LOGLOG3))


def _map_reps(fn, args_list, threads: int):
    if threads <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, args_list))


# -- LIL peaks -------------------------------------------------------------------


@dataclass
class LILReport:
    model: str
    N: int
    reps: int
    sigma_ref: float
    peaks: np.ndarray            # signed max of S_n / sqrt(2 n loglog n), n >= 3
    peak_pos: np.ndarray
    terminal: np.ndarray
    normalized: np.ndarray       # peaks / sigma_ref (zeros when degenerate)
    median: float
    q10: float
    q90: float
    window: tuple[float, float] | None
    passed: bool | None


def _lil_rep(args):
    model, N, seed, rep = args
    stream = path_stream(model, seed, key=(rep,))
    s = 0.0
    pos = 0
    peak = -math.inf
    peak_at = 0
    left = N
    while left:
        k = min(left, _CHUNK)
        x, _, _ = stream.take(k)
        S = s + np.cumsum(x)
        n = np.arange(pos + 1, pos + k + 1, dtype=np.float64)
        ratio = S / lil_denominator(n)
        if pos + k >= PEAK_START:
            lo = max(0, PEAK_START - (pos + 1))
            i = int(np.argmax(ratio[lo:])) + lo
            if ratio[i] > peak:
                peak = float(ratio[i])
                peak_at = pos + 1 + i
        s = float(S[-1])
        pos += k
        left -= k
    terminal = s / float(lil_denominator(N))
    return peak, peak_at, terminal


def run_lil(
    model: ProcessModel,
    N: int,
    reps: int,
    master_seed: int,
    sigma_ref: float,
    *,
    window: tuple[float, float] | None = None,
    threads: int = 1,
    model_name: str = "",
) -> LILReport:
    """Running peak of S_n/sqrt(2 n loglog n), streamed with O(chunk) memory.

    The peak is tracked from n = PEAK_START on (where loglog n reaches 1);
    the normalized statistic is peak / sigma_ref and the pass window, when
    given, applies to the median across replications.
    """
    if N < 1000:
        raise ValueError("need N >= 1000")
    if sigma_ref < 0:
        raise ValueError("sigma_ref must be nonnegative")
    out = _map_reps(_lil_rep, [(model, N, master_seed, r) for r in range(reps)], threads)
    peaks = np.array([o[0] for o in out])
    peak_pos = np.array([o[1] for o in out], dtype=np.int64)
    terminal = np.array([o[2] for o in out])
    if sigma_ref == 0.0:
        if float(np.max(np.abs(peaks))) > 0.0:
            raise ValueError("sigma_ref = 0 is only allowed for the zero process")
        normalized = np.zeros_like(peaks)
    else:
        normalized = peaks / sigma_ref
    med = float(np.median(normalized))
    passed = None if window is None else bool(window[0] <= med <= window[1])
    return LILReport(
        model=model_name, N=N, reps=reps, sigma_ref=sigma_ref,
        peaks=peaks, peak_pos=peak_pos, terminal=terminal, normalized=normalized,
        median=med, q10=float(np.quantile(normalized, 0.1)),
        q90=float(np.quantile(normalized, 0.9)), window=window, passed=passed,
    )


# -- functional LIL ----------------------------------------------------------------


@dataclass
class FLILReport:
    model: str
    N_list: tuple[int, ...]
    reps: int
    sigma_ref: float
    endpoint: np.ndarray     # (reps, rungs) theta_n(1)
    integral: np.ndarray     # (reps, rungs) int_0^1 theta_n
    supremum: np.ndarray     # (reps, rungs) sup_t theta_n
    knots: list              # per rep: (rung N, k, S_{k-1}, X_k, S_k)
    targets: dict            # extremal values over the energy ball
    running_max_endpoint: np.ndarray
    running_max_integral: np.ndarray
    pooled_endpoint_max: float
    pooled_integral_max: float


def _flil_rep(args):
    model, N_list, seed, rep, n_knots = args
    N_top = N_list[-1]
    rng = make_generator(seed, rep, ROLE_AUX)
    knot_idx = np.sort(rng.integers(1, N_top + 1, size=n_knots))
    stream = path_stream(model, seed, key=(rep,))
    s = 0.0
    sum_S = 0.0
    max_S = 0.0  # sup over knots includes S_0 = 0
    pos = 0
    rows = []
    knots = []
    ki = 0
    for N in N_list:
        while pos < N:
            k = min(N - pos, _CHUNK)
            x, _, _ = stream.take(k)
            S = s + np.cumsum(x)
            while ki < n_knots and pos < knot_idx[ki] <= pos + k:
                j = int(knot_idx[ki] - pos - 1)
                s_km1 = float(S[j - 1]) if j > 0 else s
                knots.append((int(knot_idx[ki]), s_km1, float(x[j]), float(S[j])))
                ki += 1
            sum_S += float(np.sum(S))
            m = float(np.max(S))
            if m > max_S:
                max_S = m
            s = float(S[-1])
            pos += k
        D = float(lil_denominator(N))
        endpoint = s / D
        integral = (sum_S - 0.5 * s) / (N * D)
        supremum = max_S / D
        rows.append((endpoint, integral, supremum))
    return rows, knots


def run_flil(
    model: ProcessModel,
    N_list,
    reps: int,
    master_seed: int,
    sigma_ref: float,
    *,
    threads: int = 1,
    model_name: str = "",
    n_knots: int = 10,
) -> FLILReport:
    N_list = tuple(int(n) for n in N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])) or N_list[0] < 1000:
        raise ValueError("N_list must increase and start at >= 1000")
    out = _map_reps(_flil_rep, [(model, N_list, master_seed, r, n_knots) for r in range(reps)], threads)
    endpoint = np.array([[row[0] for row in o[0]] for o in out])
    integral = np.array([[row[1] for row in o[0]] for o in out])
    supremum = np.array([[row[2] for row in o[0]] for o in out])
    knots = [o[1] for o in out]
    run_end = np.maximum.accumulate(endpoint, axis=1)
    run_int = np.maximum.accumulate(integral, axis=1)
    return FLILReport(
        model=model_name, N_list=N_list, reps=reps, sigma_ref=sigma_ref,
        endpoint=endpoint, integral=integral, supremum=supremum, knots=knots,
        targets={
            "endpoint": sigma_ref,
            "integral": sigma_ref / math.sqrt(3.0),
            "supremum": sigma_ref,
        },
        running_max_endpoint=run_end,
        running_max_integral=run_int,
        pooled_endpoint_max=float(np.max(endpoint)) if endpoint.size else 0.0,
        pooled_integral_max=float(np.max(integral)) if integral.size else 0.0,
    )


# -- conditional CLT ------------------------------------------------------------------


@dataclass
class CCLTReport:
    model: str
    n: int
    reps: int
    sigma_ref: float
    starts: list
    ks: np.ndarray            # per start
    samples: list             # per start: terminal S_n / sqrt(n)
    ks_null_99: float         # 99% quantile of the KS null at this rep count


def _normal_cdf(z: np.ndarray, sigma: float) -> np.ndarray:
    return 0.5 * (1.0 + erf(z / (sigma * math.sqrt(2.0))))


def ks_distance(sample: np.ndarray, sigma: float) -> float:
    """Exact sup distance between the empirical law and N(0, sigma^2)."""
    z = np.sort(np.asarray(sample, dtype=np.float64))
    R = len(z)
    if sigma == 0.0:
        return 0.0 if np.all(z == 0.0) else 1.0
    F = _normal_cdf(z, sigma)
    up = np.max(np.arange(1, R + 1) / R - F)
    dn = np.max(F - np.arange(0, R) / R)
    return float(max(up, dn))


def _cclt_rep(args):
    model, start, n, seed, rep = args
    stream = path_stream(model, seed, key=(rep,), start=start)
    s = 0.0
    left = n
    while left:
        k = min(left, _CHUNK)
        x, _, _ = stream.take(k)
        s += float(np.sum(x))
        left -= k
    return s


def run_cclt(
    model: ProcessModel,
    start,
    n: int,
    reps: int,
    master_seed: int,
    sigma_ref: float,
    *,
    threads: int = 1,
    model_name: str = "",
) -> CCLTReport:
    """Fix W_0 = start, sample conditional paths, compare S_n/sqrt(n) to the
    centered normal with variance sigma_ref^2.

    start = "each" runs every state of a finite chain; start = None runs the
    unconditional law (the i.i.d. case reduces to this).
    """
    if n < 1000:
        raise ValueError("need n >= 1000")
    if start == "each":
        if not isinstance(model, FiniteMarkovChain):
            raise ValueError("start='each' needs a finite chain")
        starts = list(range(model.m))
    else:
        starts = [start]
    if isinstance(model, (IID, LinearProcess)) and any(s is not None for s in starts):
        raise ValueError("conditioning is unsupported without stored states")
    ks_vals = []
    samples = []
    for si, st in enumerate(starts):
        out = _map_reps(
            _cclt_rep, [(model, st, n, master_seed, (si << 20) + r) for r in range(reps)], threads
        )
        z = np.array(out) / math.sqrt(n)
        samples.append(z)
        ks_vals.append(ks_distance(z, sigma_ref))
    return CCLTReport(
        model=model_name, n=n, reps=reps, sigma_ref=sigma_ref,
        starts=starts, ks=np.array(ks_vals), samples=samples,
        ks_null_99=1.628 / math.sqrt(reps),
    )


# -- remainder growth -------------------------------------------------------------------


@dataclass
class RemainderGrowthReport:
    model: str
    N_ladder: tuple[int, ...]
    reps: int
    stats: np.ndarray          # (reps, rungs) max_k |R_k| / sqrt(2 N loglog N)
    medians: np.ndarray
    limit_stats: np.ndarray | None   # same statistic for the eps -> 0 closed form
    limit_medians: np.ndarray | None


def _remainder_rep(args):
    from .martingale import decompose, _h_values

    model, N, seed, rep, use_limit = args
    eps = epsilon_for(N)
    path = sample_path(model, N, seed, key=(rep,))
    dec = decompose(path, model, eps)
    D = float(lil_denominator(N))
    stat = float(np.max(np.abs(dec.R))) / D
    stat0 = None
    if use_limit:
        res0 = poisson_resolvent(model)
        if res0 is not None:
            _, qh = _h_values(res0, path)
            R0 = qh[0] - qh[1:]
            stat0 = float(np.max(np.abs(R0))) / D
    return stat, stat0


def remainder_growth(
    model: ProcessModel,
    N_ladder,
    reps: int,
    master_seed: int,
    *,
    threads: int = 1,
    model_name: str = "",
) -> RemainderGrowthReport:
    """Normalized running-max remainder across the horizon ladder, at
    eps = eps_N per rung; the closed-form limit variant rides along where
    the Poisson solution exists."""
    N_ladder = tuple(int(n) for n in N_ladder)
    has_limit = poisson_resolvent(model) is not None
    stats = np.empty((reps, len(N_ladder)))
    lstats = np.empty((reps, len(N_ladder))) if has_limit else None
    for j, N in enumerate(N_ladder):
        out = _map_reps(
            _remainder_rep,
            [(model, N, master_seed, r, has_limit) for r in range(reps)],
            threads,
        )
        stats[:, j] = [o[0] for o in out]
        if has_limit:
            lstats[:, j] = [o[1] for o in out]
    return RemainderGrowthReport(
        model=model_name,
        N_ladder=N_ladder,
        reps=reps,
        stats=stats,
        medians=np.median(stats, axis=0),
        limit_stats=lstats,
        limit_medians=None if lstats is None else np.median(lstats, axis=0),
    )
