"""Stationary ergodic process families with explicit transfer operators.

Four families are bundled:

* ``IID`` innovations (normal, symmetric +-1, or centered uniform), all
  unit variance;
* ``LinearProcess`` X_k = sum_j a_j e_{k-j} for closed-form coefficient
  rules (finite list, geometric 2^{-(j+1)}, or kappa/(max(j,1) L(j)) with a
  slowly varying L), truncated at J with a recorded L2 tail;
* ``FiniteMarkovChain`` with functional g, validated to be irreducible,
  aperiodic and centered under its stationary law;
* ``BernoulliShift`` W_{k+1} = (W_k + bit)/2 on [0, 1) with a
  piecewise-linear functional, uniform stationary law.

Sampling is reproducible bit for bit from (model, length, seed); long
horizons stream in chunks with O(chunk) memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import bshift_path, markov_path
from .functions import AFFINE_G, INDICATOR_G, ConstFn, LinearFunctional, PiecewiseLinear
from .slowly_varying import SlowlyVaryingSpec, format_ell, parse_ell
from .streams import ROLE_INIT, ROLE_PATH, make_generator

__all__ = [
    "IID",
    "LinearProcess",
    "FiniteMarkovChain",
    "BernoulliShift",
    "PathSample",
    "iid_process",
    "ma_process",
    "geometric_linear",
    "slow_linear",
    "markov_chain",
    "chain2",
    "bernoulli_shift",
    "parse_process",
    "format_process",
    "sample_path",
    "path_stream",
    "apply_Q",
    "exact_cond_Sn",
    "sigma2_analytic",
]

_LAWS = ("normal", "rademacher", "uniform", "halfbern")
_LAW_VARIANCE = {"normal": 1.0, "rademacher": 1.0, "uniform": 1.0, "halfbern": 0.25}
_SQRT3 = math.sqrt(3.0)

_CHUNK = 1 << 20
_BSHIFT_WARMUP = 64
_EXACT_SEGMENT_BUDGET = 1 << 21


def _draw(law: str, rng: np.random.Generator, size: int) -> np.ndarray:
    if law == "normal":
        return rng.standard_normal(size)
    if law == "rademacher":
        return 2.0 * rng.integers(0, 2, size=size).astype(np.float64) - 1.0
    if law == "uniform":
        return rng.uniform(-_SQRT3, _SQRT3, size=size)
    if law == "halfbern":
        return rng.integers(0, 2, size=size).astype(np.float64) - 0.5
    raise ValueError(f"unknown innovation law {law!r}")


# -- model families -------------------------------------------------------------


@dataclass(frozen=True)
class IID:
    law: str = "normal"

    def __post_init__(self):
        if self.law not in _LAWS:
            raise ValueError(f"unknown innovation law {self.law!r}")


class LinearProcess:
    """X_k = sum_{j=0}^{J} a[j] innovation_{k-j}, innovations i.i.d. centered."""

    def __init__(self, a, law: str = "normal", rule: str = "", tail_sq: float = 0.0):
        if law not in _LAWS:
            raise ValueError(f"unknown innovation law {law!r}")
        self.a = np.ascontiguousarray(a, dtype=np.float64)
        if self.a.ndim != 1 or self.a.size == 0:
            raise ValueError("coefficients must form a nonempty 1-d sequence")
        self.law = law
        self.rule = rule or "ma:" + ",".join(f"{v:g}" for v in self.a)
        self.tail_sq = float(tail_sq)  # certified bound on sum_{j>J} a_j^2

    @property
    def J(self) -> int:
        return self.a.size - 1

    def __repr__(self):
        return f"LinearProcess({self.rule!r}, law={self.law!r}, J={self.J})"


class FiniteMarkovChain:
    """Row-stochastic P with functional g, centered under the stationary law."""

    def __init__(self, P, g, spec: str = ""):
        self.P = np.ascontiguousarray(P, dtype=np.float64)
        self.g = np.ascontiguousarray(g, dtype=np.float64)
        m = self.P.shape[0]
        if self.P.shape != (m, m) or self.g.shape != (m,):
            raise ValueError("P must be square and g must match its size")
        if np.any(self.P < 0) or np.max(np.abs(self.P.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows of P must be nonnegative and sum to 1 within 1e-12")
        if np.any(np.linalg.matrix_power(self.P, m) <= 0.0):
            raise ValueError("chain must be irreducible and aperiodic (P^m positive)")
        self.pi = _stationary(self.P)
        if np.max(np.abs(self.pi @ self.P - self.pi)) > 1e-10:
            raise ValueError("stationary distribution residual above 1e-10")
        if abs(float(self.pi @ self.g)) > 1e-10:
            raise ValueError("g must be centered under the stationary law (within 1e-10)")
        self.m = m
        self.cdf_rows = np.cumsum(self.P, axis=1)
        self.cdf_pi = np.cumsum(self.pi)
        self.spec = spec

    def __repr__(self):
        return f"FiniteMarkovChain(m={self.m})"


class BernoulliShift:
    """Doubling-map representation with a piecewise-linear functional."""

    def __init__(self, g: PiecewiseLinear, name: str = "custom", warmup_bits: int = _BSHIFT_WARMUP):
        if warmup_bits < 64:
            raise ValueError("warmup must be at least 64 bits")
        mean = g.integral()
        if abs(mean) > 1e-10:
            raise ValueError(f"g must be centered under the uniform law, integral={mean:.2e}")
        self.g = g
        self.name = name
        self.warmup_bits = int(warmup_bits)

    def __repr__(self):
        return f"BernoulliShift({self.name!r})"


ProcessModel = IID | LinearProcess | FiniteMarkovChain | BernoulliShift


def _stationary(P: np.ndarray) -> np.ndarray:
    m = P.shape[0]
    A = np.vstack([P.T - np.eye(m), np.ones((1, m))])
    b = np.concatenate([np.zeros(m), [1.0]])
    pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    return pi / pi.sum()


# -- constructors ----------------------------------------------------------------


def iid_process(law: str = "normal") -> IID:
    return IID(law)


def ma_process(coeffs, law: str = "normal") -> LinearProcess:
    a = np.asarray(coeffs, dtype=np.float64)
    return LinearProcess(a, law=law, rule="ma:" + ",".join(f"{v:g}" for v in a), tail_sq=0.0)


def geometric_linear(law: str = "halfbern") -> LinearProcess:
    """a_j = 2^{-(j+1)}; J set so the L2 tail is below 1e-16 of the total."""
    total = 1.0 / 3.0  # sum_j 4^{-(j+1)}
    J = 1
    while 4.0 ** -(J + 1) / 3.0 > 1e-16 * total:
        J += 1
    a = 0.5 ** (np.arange(J + 1) + 1.0)
    return LinearProcess(a, law=law, rule="geom", tail_sq=4.0 ** -(J + 1) / 3.0)


def slow_linear(kappa: float, L: SlowlyVaryingSpec, J: int = 100_000, law: str = "normal") -> LinearProcess:
    """a_j = kappa / (max(j,1) L(max(j,1))); certified L2 tail recorded."""
    j = np.maximum(np.arange(J + 1, dtype=np.float64), 1.0)
    a = kappa / (j * L.eval_real(j))
    tail_sq = kappa**2 / (J * float(L.eval_real(np.array(float(J)))) ** 2)
    rule = f"linear:kappa={kappa:g},L={format_ell(L)}"
    return LinearProcess(a, law=law, rule=rule, tail_sq=tail_sq)


def markov_chain(P, g) -> FiniteMarkovChain:
    return FiniteMarkovChain(P, g)


def chain2(p: float, q: float) -> FiniteMarkovChain:
    """Two states with g = (+1, -1); flip probabilities p (from 0) and q (from 1)."""
    if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
        raise ValueError("flip probabilities must lie in (0, 1)")
    P = np.array([[1.0 - p, p], [q, 1.0 - q]])
    return FiniteMarkovChain(P, np.array([1.0, -1.0]), spec=f"chain2:p={p:g},q={q:g}")


def bernoulli_shift(g="affine") -> BernoulliShift:
    if isinstance(g, PiecewiseLinear):
        return BernoulliShift(g)
    if g == "affine":
        return BernoulliShift(AFFINE_G, "affine")
    if g == "indicator":
        return BernoulliShift(INDICATOR_G, "indicator")
    raise ValueError(f"unknown doubling-map functional {g!r}")


# -- text form --------------------------------------------------------------------


def parse_process(text: str) -> ProcessModel:
    """Parse config text like 'iid:normal', 'ma:1,1', 'chain2:p=0.25,q=0.25',
    'bshift:affine', 'linear:kappa=1,L=log_pow:3'."""
    body = text.strip().strip('"')
    name, _, arg = body.partition(":")
    name = name.strip()
    if name == "iid":
        return iid_process(arg or "normal")
    if name == "ma":
        if not arg:
            raise ValueError("ma needs a coefficient list, e.g. 'ma:1,1'")
        return ma_process([float(v) for v in arg.split(",")])
    if name == "geom":
        return geometric_linear(arg or "halfbern")
    if name == "chain2":
        kv = dict(item.split("=", 1) for item in arg.split(","))
        extra = set(kv) - {"p", "q"}
        if extra:
            raise ValueError(f"chain2 got unknown keys {sorted(extra)}")
        return chain2(float(kv["p"]), float(kv["q"]))
    if name == "bshift":
        return bernoulli_shift(arg or "affine")
    if name == "linear":
        head, _, lspec = arg.partition(",L=")
        if not head.startswith("kappa=") or not lspec:
            raise ValueError("linear needs 'linear:kappa=K,L=<ell spec>'")
        return slow_linear(float(head[len("kappa="):]), parse_ell(lspec))
    raise ValueError(f"unknown process spec {text!r}")


def format_process(model: ProcessModel) -> str:
    if isinstance(model, IID):
        return f"iid:{model.law}"
    if isinstance(model, LinearProcess):
        return model.rule
    if isinstance(model, FiniteMarkovChain):
        if model.spec:
            return model.spec
        return f"chain{model.m}"
    if isinstance(model, BernoulliShift):
        return f"bshift:{model.name}"
    raise TypeError(f"not a process model: {model!r}")


# -- sampling ---------------------------------------------------------------------


@dataclass
class PathSample:
    """One sampled trajectory; x[k-1] = X_k for k = 1..n.

    states (when present) holds W_0..W_n, so x = g(states[1:]) exactly.
    innovations (linear families) holds the J prefill values followed by
    the n fresh innovations.
    """

    model: ProcessModel
    n: int
    seed: int
    x: np.ndarray
    states: np.ndarray | None = None
    innovations: np.ndarray | None = None


class _Stream:
    """Chunked stationary sampling; subclasses fill _step."""

    def __init__(self, model, seed: int, key: tuple[int, ...] = (), start=None):
        self.model = model
        self.seed = seed
        self.rng_init = make_generator(seed, *key, ROLE_INIT)
        self.rng_path = make_generator(seed, *key, ROLE_PATH)
        self.pos = 0
        self.state0 = None
        self._init(start)

    def _init(self, start):
        raise NotImplementedError

    def take(self, k: int):
        raise NotImplementedError


class _IIDStream(_Stream):
    def _init(self, start):
        if start is not None:
            raise ValueError("i.i.d. models cannot be conditioned on a start state")

    def take(self, k):
        x = _draw(self.model.law, self.rng_path, k)
        self.pos += k
        return x, None, x


class _LinearStream(_Stream):
    def _init(self, start):
        if start is not None:
            raise ValueError("linear models cannot be conditioned on a start state")
        J = self.model.J
        self.window = _draw(self.model.law, self.rng_init, J) if J else np.empty(0)
        self.window0 = self.window.copy()

    def take(self, k):
        eps = _draw(self.model.law, self.rng_path, k)
        buf = np.concatenate([self.window, eps])
        x = np.convolve(buf, self.model.a, mode="full")[self.model.J : self.model.J + k]
        if self.model.J:
            self.window = buf[-self.model.J :].copy()
        self.pos += k
        return x, None, eps


class _ChainStream(_Stream):
    def _init(self, start):
        if start is None:
            u0 = self.rng_init.random()
            self.w = int(np.searchsorted(self.model.cdf_pi, u0, side="right"))
        else:
            self.w = int(start)
            if not 0 <= self.w < self.model.m:
                raise ValueError("start state out of range")
        self.state0 = self.w
        m = self.model.m
        P = self.model.P
        self._symmetric2 = m == 2 and P[0, 1] == P[1, 0]

    def take(self, k):
        u = self.rng_path.random(k)
        if self._symmetric2:
            flips = (u < self.model.P[0, 1]).astype(np.int64)
            states = (self.w + np.cumsum(flips)) & 1
        else:
            states = np.empty(k, dtype=np.int64)
            markov_path(self.model.cdf_rows, u, self.w, states)
        self.w = int(states[-1])
        x = self.model.g[states]
        self.pos += k
        return x, states, None


class _BShiftStream(_Stream):
    def _init(self, start):
        if start is None:
            bits = self.rng_init.integers(0, 2, size=self.model.warmup_bits).astype(np.float64)
            w = 0.0
            for b in bits:  # oldest bit first; this is the update recursion itself
                w = (w + b) * 0.5
            self.w = w
        else:
            w = float(start)
            if not 0.0 <= w < 1.0:
                raise ValueError("start state must lie in [0, 1)")
            self.w = w
        self.state0 = self.w

    def take(self, k):
        bits = self.rng_path.integers(0, 2, size=k).astype(np.float64)
        states = np.empty(k, dtype=np.float64)
        self.w = bshift_path(self.w, bits, states)
        x = self.model.g(states)
        self.pos += k
        return x, states, None


def path_stream(model: ProcessModel, seed: int, key: tuple[int, ...] = (), start=None) -> _Stream:
    if isinstance(model, IID):
        return _IIDStream(model, seed, key, start)
    if isinstance(model, LinearProcess):
        return _LinearStream(model, seed, key, start)
    if isinstance(model, FiniteMarkovChain):
        return _ChainStream(model, seed, key, start)
    if isinstance(model, BernoulliShift):
        return _BShiftStream(model, seed, key, start)
    raise TypeError(f"not a process model: {model!r}")


def sample_path(model: ProcessModel, N: int, seed: int, key: tuple[int, ...] = ()) -> PathSample:
    """Materialize a stationary path of length N; reproducible bit for bit."""
    if N < 1:
        raise ValueError("need N >= 1")
    stream = path_stream(model, seed, key)
    xs, sts, innos = [], [], []
    left = N
    while left:
        k = min(left, _CHUNK)
        x, states, innov = stream.take(k)
        xs.append(x)
        if states is not None:
            sts.append(states)
        if innov is not None:
            innos.append(innov)
        left -= k
    x = np.concatenate(xs)
    states = None
    innovations = None
    if sts:
        first = np.array([stream.state0], dtype=sts[0].dtype)
        states = np.concatenate([first] + sts)
    if innos:
        if isinstance(model, LinearProcess) and model.J:
            innovations = np.concatenate([stream.window0] + innos)
        else:
            innovations = np.concatenate(innos)
    return PathSample(model=model, n=N, seed=seed, x=x, states=states, innovations=innovations)


# -- transfer operator and conditional expectations --------------------------------


def apply_Q(model: ProcessModel, f):
    """One-step conditional expectation of f given the current state."""
    if isinstance(model, FiniteMarkovChain):
        v = np.asarray(f, dtype=np.float64)
        if v.shape != (model.m,):
            raise ValueError("finite-chain functions are length-m vectors")
        return model.P @ v
    if isinstance(model, BernoulliShift):
        if not isinstance(f, PiecewiseLinear):
            raise ValueError("doubling-map functions must be piecewise linear")
        return f.doubling_average()
    if isinstance(model, LinearProcess):
        if not isinstance(f, LinearFunctional):
            raise ValueError("linear-process functions are innovation-tail functionals")
        return f.shifted()
    if isinstance(model, IID):
        if isinstance(f, LinearFunctional):
            return ConstFn(0.0)
        if isinstance(f, ConstFn):
            return ConstFn(f.value)
        if callable(f):
            return ConstFn(_expectation_iid(model.law, f))
        raise ValueError("cannot average this representation")
    raise TypeError(f"not a process model: {model!r}")


def _expectation_iid(law: str, f) -> float:
    if law == "rademacher":
        return 0.5 * (float(f(1.0)) + float(f(-1.0)))
    if law == "halfbern":
        return 0.5 * (float(f(0.5)) + float(f(-0.5)))
    if law == "uniform":
        nodes, weights = np.polynomial.legendre.leggauss(64)
        x = nodes * _SQRT3
        return float(np.sum(weights * f(x)) * 0.5)
    nodes, weights = np.polynomial.hermite_e.hermegauss(64)
    return float(np.sum(weights * f(nodes)) / math.sqrt(2.0 * math.pi))


def exact_cond_Sn(model: ProcessModel, n: int):
    """Representation of E(S_n | F_0).

    IID -> ConstFn(0); finite chain -> vector sum_{k<=n} P^k g;
    linear -> (LinearFunctional with coeffs s_{j,n}, certified tail bound);
    doubling map -> PiecewiseLinear (within the exact segment budget).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if isinstance(model, IID):
        return ConstFn(0.0)
    if isinstance(model, FiniteMarkovChain):
        acc = np.zeros(model.m)
        y = model.g.copy()
        for _ in range(n):
            y = model.P @ y
            acc += y
        return acc
    if isinstance(model, LinearProcess):
        a = model.a
        C = np.concatenate([[0.0], np.cumsum(a)])  # C[i] = a_0 + ... + a_{i-1}
        j = np.arange(model.J + 1)
        upper = np.minimum(j + n, model.J) + 1
        s = C[upper] - C[j + 1]
        # s_{j,n} = a_{j+1} + ... + a_{j+n}, exact for the (truncated) model;
        # the bound is the L2 distance to the untruncated ideal coefficients
        tail = n * math.sqrt(model.tail_sq) if model.tail_sq else 0.0
        return LinearFunctional(s), tail
    if isinstance(model, BernoulliShift):
        acc = PiecewiseLinear.constant(0.0)
        y = model.g
        for _ in range(n):
            y = y.doubling_average()
            if len(y.slopes) > _EXACT_SEGMENT_BUDGET:
                raise RuntimeError("exact-mode budget exceeded for the doubling map")
            acc = acc + y
        return acc
    raise TypeError(f"not a process model: {model!r}")


def sigma2_analytic(model: ProcessModel) -> float | None:
    """Long-run variance of S_n/sqrt(n) in closed form, where available."""
    if isinstance(model, IID):
        return 1.0
    if isinstance(model, LinearProcess):
        return float(np.sum(model.a)) ** 2 * _LAW_VARIANCE[model.law]
    if isinstance(model, FiniteMarkovChain):
        h0 = poisson_solution(model)
        Ph = model.P @ h0
        H = h0[None, :] - Ph[:, None]  # H(w0, w1) = h0(w1) - Ph0(w0)
        return float(np.sum(model.pi[:, None] * model.P * H**2))
    if isinstance(model, BernoulliShift):
        qg = model.g.doubling_average()
        lam = qg.proportion_of(model.g)
        if lam is None or lam >= 1.0:
            return None
        norm2 = model.g.moment2()
        return norm2 * (1.0 + lam) / (1.0 - lam)
    raise TypeError(f"not a process model: {model!r}")


def poisson_solution(model: FiniteMarkovChain) -> np.ndarray:
    """h0 with (I - P) h0 = g and pi . h0 = 0 (fundamental-matrix solve)."""
    m = model.m
    A = np.eye(m) - model.P + np.outer(np.ones(m), model.pi)
    return np.linalg.solve(A, model.g)
