import cmath
import math

import numpy as np
import pytest

from iterlog.coefficients import (
    a_eval,
    alpha_table,
    b_eval,
    beta_table,
    cn_mass,
    normalization_constant,
    prop3_ratio,
)
from iterlog.slowly_varying import SlowlyVaryingSpec, ell_star

from _reference import BETA1_CONST1, C_CONST1, brute_force_b

ONE = SlowlyVaryingSpec("const", 1.0)
OVL = SlowlyVaryingSpec("one_vee_log")


@pytest.fixture(scope="module")
def table_one():
    return alpha_table(beta_table(ONE, 2_000))


@pytest.fixture(scope="module")
def big_table():
    return alpha_table(beta_table(ONE, 100_001))


# -- normalization ------------------------------------------------------------


def test_normalization_reference_digits():
    c = normalization_constant(ONE, 1e-9)
    assert abs(c - C_CONST1) < 1e-9 * C_CONST1


def test_normalization_scaling():
    # quadrupling ell halves every series term, so c doubles
    c1 = normalization_constant(ONE, 1e-9)
    c4 = normalization_constant(SlowlyVaryingSpec("const", 4.0), 1e-9)
    assert abs(c4 - 2.0 * c1) < 1e-12


def test_normalization_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        normalization_constant(ONE, 1e-3)
    with pytest.raises(ValueError):
        normalization_constant(ONE, 0.0)


def test_normalization_budget_failure():
    with pytest.raises(RuntimeError):
        normalization_constant(SlowlyVaryingSpec("const", 2.0), 1e-9, term_budget=1 << 10)


@pytest.mark.parametrize("ell", [ONE, OVL, SlowlyVaryingSpec("log_pow", 2.5)])
def test_gamma1_normalized(ell):
    tab = beta_table(ell, 500)
    assert abs(tab.gamma[0] - 1.0) <= 1e-8


# -- beta / gamma table ---------------------------------------------------------


def test_beta1_is_c_zeta(table_one):
    assert abs(table_one.beta[0] - BETA1_CONST1) < 1e-10


def test_beta_strictly_decreasing(big_table):
    assert np.all(np.diff(big_table.beta) < 0.0)
    assert np.all(big_table.beta > 0.0)


def test_gamma_backward_identity_exact(big_table):
    g, b = big_table.gamma, big_table.beta
    assert np.all(g[:-1] == g[1:] + b)


def test_gamma_tail_consistency(big_table):
    # gamma_j - gamma_{j+k} = sum of the betas in between, to rounding
    g, b = big_table.gamma, big_table.beta
    for j, k in ((0, 10), (5, 500), (100, 50_000)):
        direct = math.fsum(b[j : j + k].tolist())
        assert abs((g[j] - g[j + k]) - direct) < 1e-14


def test_beta_karamata_window(big_table):
    # beta_k sqrt(k^3) approaches 2c from above; window pinned by the tail sum
    c = big_table.c
    k = np.arange(10**4, 10**5 + 1, dtype=np.float64)
    vals = big_table.beta[10**4 - 1 : 10**5] * k**1.5
    assert np.all(vals >= 1.9 * c) and np.all(vals <= 2.1 * c)


def test_gamma_karamata_window(big_table):
    c = big_table.c
    j = 10**5
    val = big_table.gamma[j - 1] * math.sqrt(j)
    assert abs(val - 4.0 * c) <= 0.05 * 4.0 * c


def test_tail_bound_is_upper_bound(big_table):
    # the certified bound dominates the gamma estimate at the horizon
    assert big_table.tail_bound >= big_table.gamma[-1] > 0.0


def test_gamma_sq_ellstar_window(big_table):
    # windowed-increment form of sum gamma_j^2 ~ (4c)^2 ell_star(n): the full
    # ratio carries an O(1)/ell_star offset (1.15 at n = 1e5), so the finite-n
    # assertion is on the (1e4, 1e5] increment, plus decrease of the full ratio
    g, c = big_table.gamma, big_table.c
    inc = float(np.sum(g[10**4 : 10**5] ** 2))
    den = (4.0 * c) ** 2 * (ell_star(ONE, 10**5) - ell_star(ONE, 10**4))
    assert abs(inc / den - 1.0) <= 0.10
    r1 = float(np.sum(g[: 10**4] ** 2)) / ((4.0 * c) ** 2 * ell_star(ONE, 10**4))
    r2 = float(np.sum(g[: 10**5] ** 2)) / ((4.0 * c) ** 2 * ell_star(ONE, 10**5))
    assert 1.0 < r2 < r1


# -- alpha recursion -------------------------------------------------------------


def test_alpha_first_values(table_one):
    a, b = table_one.alpha, table_one.beta
    assert a[0] == 1.0
    assert a[1] == b[0]
    assert abs(a[2] - (b[0] ** 2 + b[1])) < 1e-16


def test_alpha_range(big_table):
    a = big_table.alpha
    assert np.all(a > 0.0) and np.all(a <= 1.0)


def test_alpha_recursion_residual(big_table):
    # recompute the convolution with an independent summation order
    a, b = big_table.alpha, big_table.beta
    for n in (1, 2, 17, 333, 5_000, 100_000):
        conv = math.fsum((b[k - 1] * a[n - k] for k in range(1, n + 1)))
        assert abs(a[n] - conv) <= 1e-12


def test_prop3_ratio_pinned_bounds(big_table):
    # sup over [1e2, 1e5) pinned at 0.2397 by a high-precision recursion run;
    # longdouble agreement at 3.2e-17 backs the float64 table
    n, r = prop3_ratio(big_table, start=100)
    assert float(np.max(r)) <= 0.30
    assert float(np.max(r)) >= 0.20
    diffs = big_table.alpha[100:-1] - big_table.alpha[101:]
    assert np.all(diffs > 0.0)  # eventually positive, holds from 100 on


def test_prop3_ratio_one_vee_log():
    tab = alpha_table(beta_table(OVL, 20_000))
    n, r = prop3_ratio(tab, start=100)
    assert float(np.max(r)) <= 0.25


def test_prop3_ratio_rescaling(big_table):
    # swapping the normalizer only rescales the reported statistic when the
    # alpha values are held fixed: pure arithmetic on the same table
    from dataclasses import replace

    other = replace(big_table, ell=OVL)
    n1, r1 = prop3_ratio(big_table, start=10)
    n2, r2 = prop3_ratio(other, start=10)
    scale = np.sqrt(OVL.eval_real(n1))
    assert np.allclose(r2 * scale, r1, rtol=1e-13, atol=0.0)


def test_prop3_n1_entry(table_one):
    n, r = prop3_ratio(table_one, start=1)
    b = table_one.beta
    expect = b[0] - b[0] ** 2 - b[1]
    assert abs(r[0] - expect) < 1e-15


def test_cn_mass_values(big_table):
    b, a = big_table.beta, big_table.alpha
    assert cn_mass(big_table, 0) == b[0]
    assert abs(cn_mass(big_table, 1) - (b[1] + b[0] ** 2)) < 1e-16
    assert cn_mass(big_table, 10**4) < cn_mass(big_table, 10**2)


def test_alpha_requires_fill():
    tab = beta_table(ONE, 10)
    with pytest.raises(ValueError):
        prop3_ratio(tab)
    with pytest.raises(ValueError):
        cn_mass(tab, 5)


# -- Fourier boundary values -------------------------------------------------------


def test_b_at_zero():
    fe = b_eval(ONE, 0.0)
    assert abs(fe.value - 1.0) <= fe.truncation_error_bound
    assert fe.first_derivative is None


def test_b_bounded_by_one():
    for t in (0.01, 0.3, 1.0, 2.0, math.pi):
        fe = b_eval(ONE, t)
        assert abs(fe.value) <= 1.0 + fe.truncation_error_bound


def test_b_against_brute_force():
    # independent oracle: 1e7-term direct summation with Hurwitz-zeta weights
    for t in (0.5, 0.1):
        fe = b_eval(ONE, t)
        truth = brute_force_b(t)
        assert abs(fe.value - truth) <= fe.truncation_error_bound + 1e-9


def test_conjugate_symmetry():
    for t in (0.01, 0.2, 1.5):
        fp = b_eval(ONE, t, order=2)
        fm = b_eval(ONE, -t, order=2)
        assert abs(fp.value - np.conj(fm.value)) <= 1e-10
        # derivative parity: odd for b', even for b''
        assert abs(fp.first_derivative + np.conj(fm.first_derivative)) <= 1e-10 * abs(fp.first_derivative)
        assert abs(fp.second_derivative - np.conj(fm.second_derivative)) <= 1e-10 * abs(fp.second_derivative)


@pytest.mark.parametrize("t", [1e-3, 1e-4, 1e-5])
def test_bprime_asymptotic_window(t):
    c = normalization_constant(ONE, 1e-9)
    fe = b_eval(ONE, t, order=1)
    ratio = abs(fe.first_derivative) * math.sqrt(t) / (2.0 * c * math.sqrt(math.pi))
    assert 0.9 <= ratio <= 1.1


@pytest.mark.parametrize("t", [1e-3, 1e-4, 1e-5])
def test_one_minus_b_asymptotic_window(t):
    c = normalization_constant(ONE, 1e-9)
    fe = b_eval(ONE, t)
    ratio = abs(1.0 - fe.value) / math.sqrt(t) / (4.0 * c * math.sqrt(math.pi))
    assert abs(ratio - 1.0) <= 0.1


@pytest.mark.parametrize("t", [1e-3, 1e-4, 1e-5])
def test_aprime_asymptotic_window(t):
    c = normalization_constant(ONE, 1e-9)
    ae = a_eval(ONE, t, order=1)
    ratio = abs(ae.first_derivative) * t**1.5 * (8.0 * c * math.sqrt(math.pi))
    assert abs(ratio - 1.0) <= 0.1


def test_bsecond_bounded():
    vals = [
        abs(b_eval(ONE, float(t), order=2).second_derivative) * float(t) ** 1.5
        for t in np.geomspace(1e-5, 1e-2, 7)
    ]
    assert max(vals) <= 0.5  # measured 0.2943 across the window
    assert min(vals) >= 0.1


def test_a_identity():
    fe = b_eval(ONE, 0.1)
    ae = a_eval(ONE, 0.1)
    resid = abs(ae.value * (1.0 - fe.value) - 1.0)
    assert resid <= 10.0 * (ae.truncation_error_bound + fe.truncation_error_bound)


def test_fourier_rejections():
    with pytest.raises(ValueError):
        b_eval(ONE, 0.0, order=1)
    with pytest.raises(ValueError):
        b_eval(ONE, 1e-8)
    with pytest.raises(ValueError):
        b_eval(ONE, 4.0)
    with pytest.raises(ValueError):
        b_eval(ONE, 0.1, order=3)
    with pytest.raises(ValueError):
        a_eval(ONE, 0.0)


def test_bprime_window_one_vee_log():
    # the normalizer enters through ell(1/|t|)
    c = normalization_constant(OVL, 1e-9)
    t = 1e-4
    fe = b_eval(OVL, t, order=1)
    ellt = max(1.0, math.log(1.0 / t))
    ratio = abs(fe.first_derivative) * math.sqrt(t * ellt) / (2.0 * c * math.sqrt(math.pi))
    assert 0.85 <= ratio <= 1.15
