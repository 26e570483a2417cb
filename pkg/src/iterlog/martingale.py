"""Resolvents and the exact pathwise martingale decomposition.

For each family the resolvent h solving ((1+eps) I - Q) h = g is available
in a checkable form: a linear solve on finite chains, a backward recursion
on linear-process coefficients, a geometric closed form when Q g is a
multiple of g (the bundled doubling-map functionals), and a truncated
operator series otherwise.  The decomposition

    S_n = M_n + R_n,   M_n = sum H(W_{k-1}, W_k),
    R_n = eps * (h(W_1) + ... + h(W_n)) + Qh(W_0) - Qh(W_n),

with H(w0, w1) = h(w1) - Qh(w0), holds pathwise up to float rounding and
is checked by computing M and R through independent formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functions import ConstFn, LinearFunctional, PiecewiseLinear
from .processes import (
    _LAW_VARIANCE,
    IID,
    BernoulliShift,
    FiniteMarkovChain,
    LinearProcess,
    PathSample,
    ProcessModel,
    path_stream,
    poisson_solution,
    sample_path,
)
from .slowly_varying import SlowlyVaryingSpec

__all__ = [
    "Resolvent",
    "MartingaleDecomposition",
    "SigmaEstimate",
    "resolvent_h",
    "poisson_resolvent",
    "epsilon_for",
    "decompose",
    "martingale_residual_check",
    "sigma2",
    "remainder_norm_diagnostics",
]

_SERIES_CAP = 10_000_000


@dataclass
class Resolvent:
    """h and Qh for ((1+eps) I - Q) h = g, with a certified residual bound."""

    model: ProcessModel
    eps: float
    h: object
    Qh: object
    residual_bound: float


def resolvent_h(model: ProcessModel, eps: float) -> Resolvent:
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if isinstance(model, FiniteMarkovChain):
        # pi.h = 0 since pi.g = 0, so adding the rank-one projector keeps the
        # solution and removes the near-singularity as eps -> 0
        A = (1.0 + eps) * np.eye(model.m) - model.P + np.outer(np.ones(model.m), model.pi)
        h = np.linalg.solve(A, model.g)
        Qh = model.P @ h
        res = float(np.max(np.abs((1.0 + eps) * h - Qh - model.g)))
        return Resolvent(model, eps, h, Qh, res)
    if isinstance(model, IID):
        scale = 1.0 / (1.0 + eps)
        return Resolvent(model, eps, LinearFunctional(np.array([scale])), ConstFn(0.0), 0.0)
    if isinstance(model, LinearProcess):
        a = model.a
        h = np.empty_like(a)
        acc = 0.0
        for j in range(a.size - 1, -1, -1):  # h_j = (a_j + h_{j+1}) / (1+eps)
            acc = (a[j] + acc) / (1.0 + eps)
            h[j] = acc
        return Resolvent(model, eps, LinearFunctional(h), LinearFunctional(h[1:].copy()), 0.0)
    if isinstance(model, BernoulliShift):
        qg = model.g.doubling_average()
        lam = qg.proportion_of(model.g)
        if lam is not None and abs(lam) < 1.0:
            # geometric series: h = g / (1 + eps - lam)
            h = model.g * (1.0 / (1.0 + eps - lam))
            Qh = h.doubling_average()
            return Resolvent(model, eps, h, Qh, 0.0)
        acc = PiecewiseLinear.constant(0.0)
        term = model.g
        denom = 1.0 + eps
        scale = 1.0 / denom
        k = 1
        while True:
            acc = acc + term * scale
            term = term.doubling_average()
            scale /= denom
            sup = term.sup_abs()
            tail = sup * scale / (1.0 - 1.0 / denom)
            if tail <= 1e-12:
                break
            k += 1
            if k > _SERIES_CAP:
                raise RuntimeError("resolvent series exceeded the term budget")
        Qh = acc.doubling_average()
        resid = ((acc * (1.0 + eps)) - Qh - model.g).sup_abs()
        return Resolvent(model, eps, acc, Qh, resid + tail)
    raise TypeError(f"not a process model: {model!r}")


def poisson_resolvent(model: ProcessModel) -> Resolvent | None:
    """The eps -> 0 limit h0 with (I - Q) h0 = g, where a closed form exists."""
    if isinstance(model, FiniteMarkovChain):
        h0 = poisson_solution(model)
        return Resolvent(model, 0.0, h0, model.P @ h0, 0.0)
    if isinstance(model, IID):
        return Resolvent(model, 0.0, LinearFunctional(np.array([1.0])), ConstFn(0.0), 0.0)
    if isinstance(model, LinearProcess):
        # h0_j = sum_{i>=j} a_i
        h0 = np.cumsum(model.a[::-1])[::-1].copy()
        return Resolvent(model, 0.0, LinearFunctional(h0), LinearFunctional(h0[1:].copy()), 0.0)
    if isinstance(model, BernoulliShift):
        qg = model.g.doubling_average()
        lam = qg.proportion_of(model.g)
        if lam is not None and abs(lam) < 1.0:
            h0 = model.g * (1.0 / (1.0 - lam))
            return Resolvent(model, 0.0, h0, h0.doubling_average(), 0.0)
        return None
    raise TypeError(f"not a process model: {model!r}")


def epsilon_for(n: int) -> float:
    """eps_n = 2^{-k} with 2^{k-1} <= n < 2^k, so 1/(2n) <= eps_n <= 1/n."""
    if n < 1:
        raise ValueError("need n >= 1")
    return 2.0 ** -int(n).bit_length()


def _h_values(resolvent: Resolvent, path: PathSample) -> tuple[np.ndarray, np.ndarray]:
    """(h(W_k) for k=1..n, Qh(W_k) for k=0..n) along a sampled path."""
    model = resolvent.model
    if isinstance(model, FiniteMarkovChain):
        if path.states is None:
            raise ValueError("path must carry states")
        h = resolvent.h[path.states]
        qh = resolvent.Qh[path.states]
        return h[1:], qh
    if isinstance(model, BernoulliShift):
        if path.states is None:
            raise ValueError("path must carry states")
        return resolvent.h(path.states[1:]), resolvent.Qh(path.states)
    if isinstance(model, IID):
        scale = float(resolvent.h.coeffs[0])
        h = scale * path.x
        return h, np.zeros(path.n + 1)
    if isinstance(model, LinearProcess):
        if path.innovations is None:
            raise ValueError("path must carry innovations")
        J = model.J
        buf = path.innovations  # buf[J-1+k] = innovation at time k
        hv = np.convolve(buf, resolvent.h.coeffs, mode="full")
        if J == 0:
            return hv[: path.n], np.zeros(path.n + 1)
        h = hv[J : J + path.n]
        qv = np.convolve(buf, resolvent.Qh.coeffs, mode="full")
        qh = qv[J - 1 : J + path.n]
        return h, qh
    raise TypeError(f"not a process model: {model!r}")


@dataclass
class MartingaleDecomposition:
    """Arrays S, M, R (1..n) with the identity residual of S - M - R."""

    eps: float
    S: np.ndarray
    M: np.ndarray
    R: np.ndarray
    max_identity_residual: float
    resolvent_residual: float


def decompose(path: PathSample, model: ProcessModel, eps: float) -> MartingaleDecomposition:
    """Exact pathwise split S_n = M_n(eps) + R_n(eps); R is built independently."""
    res = resolvent_h(model, eps)
    h, qh = _h_values(res, path)
    S = np.cumsum(path.x)
    M = np.cumsum(h - qh[:-1])
    R = eps * np.cumsum(h) + qh[0] - qh[1:]
    resid = float(np.max(np.abs(S - M - R))) / (1.0 + float(np.max(np.abs(S))))
    return MartingaleDecomposition(
        eps=eps, S=S, M=M, R=R,
        max_identity_residual=resid,
        resolvent_residual=res.residual_bound,
    )


@dataclass
class ResidualCheckReport:
    kind: str  # "exact" or "monte_carlo"
    value: float
    stderr: float | None


def martingale_residual_check(model: ProcessModel, eps: float, *,
                              n: int = 1_000_000, seed: int = 0) -> ResidualCheckReport:
    """Conditional centering of the increments H(w0, w1) = h(w1) - Qh(w0).

    Finite chains: exact max_w |sum_w' P(w,w') h(w') - Qh(w)|.  Sampled
    families: the empirical mean of the increments with its standard error.
    """
    res = resolvent_h(model, eps)
    if isinstance(model, FiniteMarkovChain):
        val = float(np.max(np.abs(model.P @ res.h - res.Qh)))
        return ResidualCheckReport("exact", val, None)
    path = sample_path(model, n, seed)
    h, qh = _h_values(res, path)
    incr = h - qh[:-1]
    return ResidualCheckReport(
        "monte_carlo", float(np.mean(incr)), float(np.std(incr) / math.sqrt(len(incr)))
    )


@dataclass
class SigmaEstimate:
    value: float
    stderr: float
    method: str
    detail: dict


def _exact_H2(model: FiniteMarkovChain, eps: float) -> float:
    res = resolvent_h(model, eps)
    H = res.h[None, :] - res.Qh[:, None]
    return float(np.sum(model.pi[:, None] * model.P * H**2))


def sigma2(model: ProcessModel, method: str, *, n: int = 4096, reps: int = 8192,
           seed: int = 0) -> SigmaEstimate:
    """Long-run variance two ways.

    variance_rate: Monte Carlo E[S_n^2]/n over independent replications.
    increment: E[H_eps^2] at eps = eps_n, Richardson-extrapolated over the
    dyadic pair (eps, 2 eps); exact on finite chains, sampled otherwise.
    """
    if method == "variance_rate":
        vals = np.empty(reps)
        for r in range(reps):
            stream = path_stream(model, seed, key=(r, 0))
            s = 0.0
            left = n
            while left:
                k = min(left, 1 << 20)
                x, _, _ = stream.take(k)
                s += float(np.sum(x))
                left -= k
            vals[r] = s * s / n
        return SigmaEstimate(
            value=float(np.mean(vals)),
            stderr=float(np.std(vals) / math.sqrt(reps)),
            method=method,
            detail={"n": n, "reps": reps},
        )
    if method != "increment":
        raise ValueError("method must be 'variance_rate' or 'increment'")

    eps = epsilon_for(n)
    if isinstance(model, FiniteMarkovChain):
        v1, v2 = _exact_H2(model, eps), _exact_H2(model, 2.0 * eps)
        value = 2.0 * v1 - v2
        return SigmaEstimate(value, abs(v1 - v2), "increment",
                             {"eps": eps, "exact": True, "pair": (v1, v2)})

    def mean_H2(e: float) -> tuple[float, float]:
        res = resolvent_h(model, e)
        per_rep = np.empty(reps)
        for r in range(reps):
            path = sample_path(model, n, seed, key=(r, 1))
            h, qh = _h_values(res, path)
            incr = h - qh[:-1]
            per_rep[r] = float(np.mean(incr**2))
        return float(np.mean(per_rep)), float(np.std(per_rep) / math.sqrt(reps))

    v1, se1 = mean_H2(eps)
    v2, se2 = mean_H2(2.0 * eps)
    value = 2.0 * v1 - v2
    stderr = math.sqrt(4.0 * se1**2 + se2**2) + 0.5 * abs(v1 - v2)
    return SigmaEstimate(value, stderr, "increment", {"eps": eps, "exact": False})


# -- remainder norm diagnostics ---------------------------------------------------


@dataclass
class RemainderDiagnostics:
    ns: np.ndarray
    r_norm: np.ndarray                 # ||R_n(eps_n)||
    normalized: np.ndarray             # sqrt(ell(n)/n) ||R_n||
    series_partial: np.ndarray         # partial sums of sqrt(ell(n)/n^3) ||R_n||
    lemma_j: np.ndarray
    lemma_terms: np.ndarray            # j sqrt(ell(2^j)) sqrt(delta_j) ||h_{delta_j}||
    lemma_partial: np.ndarray
    stderr: np.ndarray | None


def _chain_rnorm_exact(model: FiniteMarkovChain, n: int, eps: float) -> float:
    """||eps S_n(h) + Qh(W_0) - Qh(W_n)|| in L2 of the stationary chain."""
    res = resolvent_h(model, eps)
    h, q = res.h, res.Qh
    pi = model.pi
    P = model.P
    # iterated actions P^d h and P^d q
    A = np.empty(n)      # A[d-1] = E[h(W_0) h(W_d)]
    B = np.empty(n)      # B[d-1] = E[q(W_0) h(W_d)]
    C = np.empty(n + 1)  # C[d] = E[h(W_0) q(W_d)]
    E = np.empty(n + 1)  # E[d] = E[q(W_0) q(W_d)]
    yh = h.copy()
    yq = q.copy()
    C[0] = float(pi @ (h * q))
    E[0] = float(pi @ (q * q))
    for d in range(1, n + 1):
        yh = P @ yh
        yq = P @ yq
        C[d] = float(pi @ (h * yq))
        E[d] = float(pi @ (q * yq))
        A[d - 1] = float(pi @ (h * yh))
        B[d - 1] = float(pi @ (q * yh))
    A0 = float(pi @ (h * h))
    T1 = n * A0 + 2.0 * float(np.sum((n - np.arange(1, n)) * A[: n - 1]))
    T2 = float(np.sum(B[:n])) - float(np.sum(C[:n]))
    T3 = 2.0 * (E[0] - E[n])
    val = eps * eps * T1 + 2.0 * eps * T2 + T3
    return math.sqrt(max(val, 0.0))


def _h_l2_norm(model: ProcessModel, res: Resolvent) -> float:
    if isinstance(model, FiniteMarkovChain):
        return math.sqrt(float(model.pi @ (res.h**2)))
    if isinstance(model, BernoulliShift):
        return math.sqrt(res.h.moment2())
    if isinstance(model, (IID, LinearProcess)):
        return res.h.l2_norm(_LAW_VARIANCE[model.law])
    raise TypeError(f"not a process model: {model!r}")


def remainder_norm_diagnostics(
    model: ProcessModel,
    N: int,
    ell: SlowlyVaryingSpec,
    *,
    reps: int = 64,
    seed: int = 0,
    j_max: int = 60,
) -> RemainderDiagnostics:
    """||R_n|| at eps = eps_n over a dyadic ladder, plus the dyadic sum terms
    j sqrt(ell(2^j) delta_j) ||h_{delta_j}|| with exact resolvent norms."""
    ns = []
    n = 1
    while n <= N:
        ns.append(n)
        n *= 2
    ns = np.array(ns, dtype=np.int64)

    r_norm = np.empty(len(ns))
    stderr = None
    if isinstance(model, FiniteMarkovChain):
        for i, nn in enumerate(ns):
            r_norm[i] = _chain_rnorm_exact(model, int(nn), epsilon_for(int(nn)))
    else:
        stderr = np.empty(len(ns))
        for i, nn in enumerate(ns):
            eps = epsilon_for(int(nn))
            vals = np.empty(reps)
            for r in range(reps):
                path = sample_path(model, int(nn), seed, key=(r, 3))
                dec = decompose(path, model, eps)
                vals[r] = dec.R[-1] ** 2
            r_norm[i] = math.sqrt(float(np.mean(vals)))
            spread = float(np.std(vals) / math.sqrt(reps))
            stderr[i] = 0.5 * spread / max(r_norm[i], 1e-12)

    nf = ns.astype(np.float64)
    ellv = ell.eval_real(nf)
    normalized = np.sqrt(ellv / nf) * r_norm
    # dyadic majorant of sum_n sqrt(ell(n)/n^3) ||R_n||: each rung stands for
    # its 2^j-sized block, so the block weight is n itself
    series_partial = np.cumsum(np.sqrt(ellv / nf**3) * r_norm * nf)

    js = np.arange(1, j_max + 1)
    lemma_terms = np.empty(j_max)
    for idx, j in enumerate(js):
        delta = 2.0**-j
        res = resolvent_h(model, delta)
        hn = _h_l2_norm(model, res)
        lemma_terms[idx] = j * math.sqrt(float(ell.eval_real(np.array(2.0**j)))) * math.sqrt(delta) * hn
    return RemainderDiagnostics(
        ns=ns,
        r_norm=r_norm,
        normalized=normalized,
        series_partial=series_partial,
        lemma_j=js,
        lemma_terms=lemma_terms,
        lemma_partial=np.cumsum(lemma_terms),
        stderr=stderr,
    )
