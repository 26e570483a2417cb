import math

import mpmath as mp
import numpy as np
import pytest

from iterlog.series import improper_integral, monotone_tail, oscillatory_tail


def test_improper_integral_power():
    val, err = improper_integral(lambda x: x**-1.5, 100.0)
    assert abs(val - 2.0 / math.sqrt(100.0)) < 1e-10


def test_improper_integral_log_modulated():
    # integral_a^inf ln(x) x^{-3/2} dx = 2 (ln a + 2) / sqrt(a)
    a = 50.0
    val, err = improper_integral(lambda x: np.log(x) * x**-1.5, a)
    assert abs(val - 2.0 * (math.log(a) + 2.0) / math.sqrt(a)) < 1e-9


@pytest.mark.parametrize("m", [1_000, 100_000])
def test_monotone_tail_against_hurwitz(m):
    est, bound = monotone_tail(lambda x: x**-1.5, m)
    truth = float(mp.zeta(1.5, m + 1))
    assert abs(est - truth) <= bound
    assert bound < 2.0 * m**-1.5


@pytest.mark.parametrize("s,t,K", [
    (1.5, 0.5, 200),
    (1.5, 0.05, 1_600),
    (1.5, -0.05, 1_600),
    (0.5, 0.05, 2_000),
])
def test_oscillatory_tail_against_polylog(s, t, K):
    mp.mp.dps = 30
    z = mp.exp(1j * mp.mpf(t))
    li = complex(mp.polylog(mp.mpf(s), z))
    n = np.arange(1, K + 1, dtype=np.float64)
    head = complex(np.sum(n**-s * np.exp(1j * t * n)))
    truth = li - head
    window = (np.arange(K + 1, K + 12, dtype=np.float64)) ** -s
    est, bound = oscillatory_tail(window, t, K)
    assert abs(est - truth) <= bound
    assert bound < 5e-6


def test_oscillatory_tail_validates():
    w = (np.arange(10, 22, dtype=np.float64)) ** -1.5
    with pytest.raises(ValueError):
        oscillatory_tail(w, 0.0, 9)
    with pytest.raises(ValueError):
        oscillatory_tail(w[:3], 0.1, 9)
