import numpy as np
import pytest

from iterlog.functions import AFFINE_G, INDICATOR_G, LinearFunctional, PiecewiseLinear


def test_eval_and_integrals_affine():
    g = AFFINE_G
    w = np.array([0.0, 0.25, 0.5, 0.999])
    assert np.all(g(w) == w - 0.5)
    assert abs(g.integral()) < 1e-16
    assert abs(g.moment2() - 1.0 / 12.0) < 1e-16
    assert g.sup_abs() == 0.5


def test_eval_indicator_halfopen():
    g = INDICATOR_G
    assert g(0.0) == 0.5
    assert g(0.49999) == 0.5
    assert g(0.5) == -0.5
    assert abs(g.integral()) < 1e-16
    assert abs(g.moment2() - 0.25) < 1e-16


def test_doubling_average_affine():
    q = AFFINE_G.doubling_average()
    lam = q.proportion_of(AFFINE_G)
    assert lam == 0.5


def test_doubling_average_indicator_vanishes():
    q = INDICATOR_G.doubling_average()
    assert q.sup_abs() == 0.0
    assert q.proportion_of(INDICATOR_G) == 0.0


def test_algebra_and_merge():
    f = AFFINE_G + INDICATOR_G
    w = np.linspace(0.0, 0.99, 101)
    assert np.allclose(f(w), AFFINE_G(w) + INDICATOR_G(w))
    h = (2.0 * AFFINE_G) - AFFINE_G
    assert np.allclose(h(w), AFFINE_G(w))
    assert len(h.merged().slopes) == 1


def test_doubling_exact_dyadic_breakpoints():
    # breakpoints double and fold exactly in binary floating point
    f = PiecewiseLinear([0.0, 0.375, 1.0], [1.0, -1.0], [0.0, 0.75])
    q = f.doubling_average()
    assert 0.75 in q.xs  # 2 * 0.375
    w = np.linspace(0.0, 0.999, 777)
    direct = 0.5 * (f(w / 2.0) + f((1.0 + w) / 2.0))
    assert np.allclose(q(w), direct, rtol=0.0, atol=1e-15)


def test_constructor_validation():
    with pytest.raises(ValueError):
        PiecewiseLinear([0.0, 0.5], [1.0], [0.0])  # must end at 1
    with pytest.raises(ValueError):
        PiecewiseLinear([0.0, 0.5, 0.5, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        PiecewiseLinear([0.0, 1.0], [1.0, 2.0], [0.0])


def test_linear_functional_shift_and_norm():
    f = LinearFunctional(np.array([1.0, 0.5, 0.25]))
    s = f.shifted()
    assert np.all(s.coeffs == np.array([0.5, 0.25]))
    assert abs(f.l2_norm() - np.sqrt(1.3125)) < 1e-15
    assert abs(f.l2_norm(0.25) - 0.5 * np.sqrt(1.3125)) < 1e-15
