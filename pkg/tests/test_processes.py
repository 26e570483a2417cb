import math

import numpy as np
import pytest

import iterlog as il
from iterlog.functions import ConstFn, LinearFunctional
from iterlog.processes import _LAW_VARIANCE

from _reference import chain_cov_gg

CHAIN = il.chain2(0.25, 0.25)
BSHIFT = il.bernoulli_shift("affine")
MODELS = {
    "iid": il.iid_process("normal"),
    "ma1": il.ma_process([1.0, 1.0]),
    "chain2": CHAIN,
    "bshift": BSHIFT,
}


# -- construction and validation -----------------------------------------------


def test_chain_construction_validates():
    with pytest.raises(ValueError):
        il.chain2(0.0, 0.5)
    with pytest.raises(ValueError):
        il.markov_chain([[0.5, 0.5], [0.3, 0.6]], [1.0, -1.0])  # rows don't sum to 1
    with pytest.raises(ValueError):
        il.markov_chain([[1.0, 0.0], [0.0, 1.0]], [1.0, -1.0])  # reducible
    with pytest.raises(ValueError):
        il.markov_chain([[0.75, 0.25], [0.25, 0.75]], [1.0, 1.0])  # not centered


def test_chain_stationary_props():
    assert np.max(np.abs(CHAIN.pi - 0.5)) < 1e-12
    assert np.max(np.abs(CHAIN.pi @ CHAIN.P - CHAIN.pi)) <= 1e-10
    assert abs(float(CHAIN.pi @ CHAIN.g)) <= 1e-10
    # asymmetric chain
    ch = il.markov_chain([[0.9, 0.1], [0.2, 0.8]], [1.0, -2.0])
    assert np.allclose(ch.pi, [2.0 / 3.0, 1.0 / 3.0])


def test_bshift_centering_validated():
    bad = il.PiecewiseLinear([0.0, 1.0], [0.0], [0.3])
    with pytest.raises(ValueError):
        il.bernoulli_shift(bad)


def test_geometric_linear_tail_rule():
    m = il.geometric_linear()
    total = float(np.sum(m.a**2))
    assert m.tail_sq <= 1e-16 * (total + m.tail_sq)
    assert m.law == "halfbern"


def test_parse_format_round_trip():
    for text in ("iid:normal", "iid:uniform", "ma:1,1", "ma:0",
                 "chain2:p=0.25,q=0.25", "bshift:affine", "bshift:indicator",
                 "linear:kappa=1,L=log_pow:3", "geom"):
        m = il.parse_process(text)
        assert il.format_process(m) == text
    with pytest.raises(ValueError):
        il.parse_process("chain2:p=1.5,q=0.25")
    with pytest.raises(ValueError):
        il.parse_process("iid:cauchy")
    with pytest.raises(ValueError):
        il.parse_process("nope:1")


# -- sampling ---------------------------------------------------------------------


@pytest.mark.parametrize("name", list(MODELS), ids=list(MODELS))
def test_determinism_bit_for_bit(name):
    m = MODELS[name]
    p1 = il.sample_path(m, 5_000, 123)
    p2 = il.sample_path(m, 5_000, 123)
    assert np.array_equal(p1.x, p2.x)
    for a, b in ((p1.states, p2.states), (p1.innovations, p2.innovations)):
        assert (a is None) == (b is None)
        if a is not None:
            assert np.array_equal(a, b)
    p3 = il.sample_path(m, 5_000, 124)
    assert not np.array_equal(p1.x, p3.x)


@pytest.mark.parametrize("name", list(MODELS), ids=list(MODELS))
def test_stream_prefix_property(name):
    # drawing in small chunks reproduces the one-shot arrays bit for bit
    m = MODELS[name]
    whole = il.sample_path(m, 4_096, 7)
    stream = il.path_stream(m, 7)
    xs = [stream.take(k)[0] for k in (1, 10, 85, 4_000)]
    assert np.array_equal(np.concatenate(xs), whole.x)


def test_g_consistency_exact():
    for m in (CHAIN, BSHIFT):
        p = il.sample_path(m, 10_000, 3)
        if isinstance(m, il.FiniteMarkovChain):
            assert np.array_equal(p.x, m.g[p.states[1:]])
        else:
            assert np.array_equal(p.x, m.g(p.states[1:]))


def test_bshift_recursion_exact():
    p = il.sample_path(BSHIFT, 50_000, 11)
    W = p.states
    bits = np.rint(2.0 * W[1:] - W[:-1])
    assert np.all((bits == 0.0) | (bits == 1.0))
    # the stored states satisfy the update identity in IEEE arithmetic
    assert np.array_equal((W[:-1] + bits) * 0.5, W[1:])


def test_chain2_occupancy():
    p = il.sample_path(CHAIN, 10**6, 5)
    occ0 = float(np.mean(p.states[1:] == 0))
    se = math.sqrt(0.25 / 10**6) * math.sqrt((1 + 0.5) / (1 - 0.5))  # rho = 1/2 chain
    assert abs(occ0 - 0.5) <= 4 * se


def test_asymmetric_chain_stationarity():
    ch = il.markov_chain([[0.9, 0.1], [0.2, 0.8]], [1.0, -2.0])
    p = il.sample_path(ch, 200_000, 9)
    occ0 = float(np.mean(p.states[1:] == 0))
    assert abs(occ0 - 2.0 / 3.0) < 0.01


@pytest.mark.parametrize("name", list(MODELS), ids=list(MODELS))
def test_stationarity_windows(name):
    # disjoint windows of one long path agree in mean and variance
    m = MODELS[name]
    p = il.sample_path(m, 10**6, 17)
    w = p.x.reshape(4, -1)
    mu = w.mean(axis=1)
    var = w.var(axis=1)
    sig2 = il.sigma2_analytic(m)
    se_mu = math.sqrt(sig2 / w.shape[1])  # long-run variance controls the mean
    assert np.max(np.abs(mu)) <= 4 * se_mu
    se_var = var.std() / math.sqrt(4) + 1e-12
    assert np.max(np.abs(var - var.mean())) <= 6 * se_var


def test_sample_rejects():
    with pytest.raises(ValueError):
        il.sample_path(CHAIN, 0, 1)
    with pytest.raises(ValueError):
        il.path_stream(il.iid_process(), 1, start=0.5)


# -- transfer operator ---------------------------------------------------------------


def test_apply_Q_chain():
    qg = il.apply_Q(CHAIN, CHAIN.g)
    assert np.array_equal(qg, CHAIN.g / 2.0)


def test_apply_Q_contraction_exact():
    y = CHAIN.g.copy()
    for k in range(1, 51):
        y = il.apply_Q(CHAIN, y)
        assert np.array_equal(y, CHAIN.g / 2.0**k)


def test_apply_Q_bshift():
    qg = il.apply_Q(BSHIFT, BSHIFT.g)
    assert qg.proportion_of(BSHIFT.g) == 0.5
    q_ind = il.apply_Q(il.bernoulli_shift("indicator"), il.bernoulli_shift("indicator").g)
    assert q_ind.sup_abs() == 0.0


def test_apply_Q_iid_and_linear():
    out = il.apply_Q(il.iid_process("rademacher"), lambda w: w**3 + w)
    assert isinstance(out, ConstFn) and out.value == 0.0
    # centered callables under the normal law average to ~0 by quadrature
    out = il.apply_Q(il.iid_process("normal"), lambda w: w)
    assert abs(out.value) < 1e-12
    f = LinearFunctional(np.array([1.0, 0.5]))
    out = il.apply_Q(il.ma_process([1.0, 0.5]), f)
    assert np.all(out.coeffs == np.array([0.5]))


# -- conditional expectations ----------------------------------------------------------


def test_exact_cond_Sn_iid():
    out = il.exact_cond_Sn(il.iid_process(), 5)
    assert isinstance(out, ConstFn) and out.value == 0.0


@pytest.mark.parametrize("n", [1, 2, 5, 50])
def test_exact_cond_Sn_ma1(n):
    f, tail = il.exact_cond_Sn(il.ma_process([1.0, 1.0]), n)
    assert f.coeffs[0] == 1.0
    assert np.all(f.coeffs[1:] == 0.0)
    assert tail == 0.0


@pytest.mark.parametrize("n", [1, 3, 10, 40])
def test_exact_cond_Sn_chain(n):
    v = il.exact_cond_Sn(CHAIN, n)
    expect = CHAIN.g * (1.0 - 2.0**-n)
    assert np.max(np.abs(v - expect)) < 1e-14


def test_exact_cond_Sn_bshift_affine():
    v = il.exact_cond_Sn(BSHIFT, 10)
    w = np.linspace(0.0, 0.99, 97)
    expect = (w - 0.5) * (1.0 - 2.0**-10)
    assert np.allclose(v(w), expect, rtol=0.0, atol=1e-15)


def test_exact_cond_Sn_bshift_indicator_zero():
    v = il.exact_cond_Sn(il.bernoulli_shift("indicator"), 7)
    assert v.sup_abs() == 0.0


# -- cross-family agreement -------------------------------------------------------------


def test_bshift_matches_geometric_linear():
    # the affine doubling-map functional and the geometric average of
    # centered bits describe the same process: matching autocovariances
    N = 10**6
    xb = il.sample_path(BSHIFT, N, 13).x
    xg = il.sample_path(il.geometric_linear("halfbern"), N, 14).x
    for k in range(6):
        target = 2.0**-k / 12.0
        for x in (xb, xg):
            emp = float(np.mean(x[: N - k] * x[k:]))
            se = float(np.std(x[: N - k] * x[k:])) / math.sqrt(N - k)
            assert abs(emp - target) <= 4 * se


def test_sigma2_analytic_values():
    assert il.sigma2_analytic(il.iid_process()) == 1.0
    assert il.sigma2_analytic(CHAIN) == pytest.approx(3.0, abs=1e-12)
    assert il.sigma2_analytic(BSHIFT) == pytest.approx(0.25, abs=1e-12)
    assert il.sigma2_analytic(il.bernoulli_shift("indicator")) == pytest.approx(0.25, abs=1e-12)
    assert il.sigma2_analytic(il.ma_process([1.0, 1.0])) == pytest.approx(4.0, abs=1e-12)
    assert il.sigma2_analytic(il.ma_process([0.0])) == 0.0
