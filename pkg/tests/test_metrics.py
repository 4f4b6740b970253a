import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predsearch.errors import ValidationError
from predsearch.metrics import (
    capped_primal_gap,
    gap_at,
    primal_gap,
    primal_integral,
    wilcoxon_signed_rank,
)


def test_primal_gap_examples():
    assert primal_gap(100.0, 100.0) == 0.0
    assert primal_gap(103.0, 100.0) == pytest.approx(0.03)
    # v* = 0 triggers the epsilon guard; raw value is huge, cap is 1
    assert primal_gap(0.5, 0.0) == pytest.approx(0.5 / 1e-8)
    assert capped_primal_gap(0.5, 0.0) == 1.0
    # missing incumbent and sign mismatch fall back to 1
    assert primal_gap(None, 10.0) == 1.0
    assert primal_gap(-5.0, 5.0) == 1.0
    assert primal_gap(-5.0, -5.0) == 0.0


def test_primal_integral_examples():
    assert primal_integral([], 1.0, 10.0) == pytest.approx(10.0)
    assert primal_integral([(0.0, 5.0)], 5.0, 10.0) == pytest.approx(0.0)
    # incumbent at t=2 with gap 0.5 over T=10: 2*1 + 8*0.5 = 6
    assert primal_integral([(2.0, 150.0)], 100.0, 10.0) == pytest.approx(6.0)


def test_primal_integral_validation():
    with pytest.raises(ValidationError):
        primal_integral([(2.0, 1.0), (1.0, 0.5)], 1.0, 10.0)
    with pytest.raises(ValidationError):
        primal_integral([(11.0, 1.0)], 1.0, 10.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_primal_integral_monotone_in_horizon(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, 6))
    times = np.sort(rng.uniform(0.0, 8.0, size=k))
    objs = np.sort(rng.uniform(50.0, 150.0, size=k))[::-1]
    trace = list(zip(times, objs))
    v_star = 50.0
    t1 = float(rng.uniform(8.0, 12.0))
    t2 = t1 + float(rng.uniform(0.0, 5.0))
    p1 = primal_integral(trace, v_star, t1)
    p2 = primal_integral(trace, v_star, t2)
    assert p2 >= p1 - 1e-12
    assert p1 <= t1 + 1e-12


def test_gap_at_steps():
    trace = [(1.0, 120.0), (3.0, 110.0)]
    assert gap_at(trace, 100.0, 0.5) == 1.0
    assert gap_at(trace, 100.0, 1.5) == pytest.approx(0.2)
    assert gap_at(trace, 100.0, 5.0) == pytest.approx(0.1)


def test_wilcoxon_identical_vectors_warn():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        p = wilcoxon_signed_rank([1.0, 2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 3.0, 4.0, 5.0])
    assert p == 1.0
    assert caught


def test_wilcoxon_exact_all_positive_n5():
    a = np.array([2.0, 3.0, 4.0, 5.0, 6.0])
    b = np.array([1.0, 1.5, 2.0, 2.5, 3.0])
    p = wilcoxon_signed_rank(a, b)
    assert p == pytest.approx(2.0 / 32.0)


def test_wilcoxon_small_n_error():
    with pytest.raises(ValidationError):
        wilcoxon_signed_rank([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])


def test_wilcoxon_matches_scipy_exact():
    stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(101)
    for _ in range(25):
        n = int(rng.integers(6, 19))
        a = rng.normal(size=n)
        b = a + rng.normal(loc=0.3, size=n)
        # continuous draws: no ties, scipy's exact mode applies
        p_mine = wilcoxon_signed_rank(a, b)
        p_ref = stats.wilcoxon(a, b, alternative="two-sided", mode="exact").pvalue
        assert p_mine == pytest.approx(p_ref, abs=1e-12)


def test_wilcoxon_exact_vs_approx_agree_at_n15():
    from predsearch.metrics import _approx_two_sided_p, _mid_ranks

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(40):
        a = rng.normal(size=15)
        shift = rng.uniform(0.0, 1.0)
        b = a + rng.normal(loc=shift, scale=0.8, size=15)
        d = a - b
        d = d[d != 0]
        exact = wilcoxon_signed_rank(a, b)
        ranks = _mid_ranks(np.abs(d))
        approx = _approx_two_sided_p(ranks, float(ranks[d > 0].sum()))
        worst = max(worst, abs(exact - approx))
    assert worst < 0.01


def test_wilcoxon_large_n_uses_approximation():
    rng = np.random.default_rng(11)
    a = rng.normal(size=30)
    b = a + rng.normal(loc=1.0, scale=0.5, size=30)
    p = wilcoxon_signed_rank(a, b)
    assert 0.0 <= p <= 0.01  # strong one-directional shift is significant
