import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kthboot.errors import EmptyInput
from kthboot.gaussian_reference import inclusion_exclusion_indicator
from kthboot.stats_core import (
    ecdf_quantile,
    exceedance_count,
    factorial_moment_estimate,
    kth_order_stat,
    normalized_sum,
    quantile_index,
)


def test_normalized_sum_small_cases():
    assert np.array_equal(normalized_sum(np.array([[1.0, 2.0]])), [1, 2])
    assert np.array_equal(normalized_sum(np.array([[1.0, 0.0], [-1.0, 0.0]])), [0, 0])


def test_normalized_sum_loop_oracle(rng):
    X = rng.standard_normal((5, 3))
    ref = [sum(X[i, j] for i in range(5)) / math.sqrt(5) for j in range(3)]
    assert np.allclose(normalized_sum(X), ref, rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize("v,k,expected", [((3, 1, 2), 2, 2), ((5, 5, 1), 2, 5), ((5, 5, 1), 3, 1)])
def test_kth_order_stat_examples(v, k, expected):
    assert kth_order_stat(v, k) == expected


def test_kth_order_stat_sort_oracle(rng):
    v = rng.standard_normal(100)
    desc = np.sort(v)[::-1]
    for k in range(1, 101):
        assert kth_order_stat(v, k) == desc[k - 1]
    assert kth_order_stat(v, 1) == v.max() and kth_order_stat(v, 100) == v.min()


def test_kth_order_stat_rows(rng):
    V = rng.standard_normal((7, 30))
    assert np.array_equal(kth_order_stat(V, 3, axis=1), np.sort(V, axis=1)[:, -3])


@pytest.mark.parametrize("k", [0, 4])
def test_kth_order_stat_index_error(k):
    with pytest.raises(IndexError):
        kth_order_stat([1.0, 2.0, 3.0], k)


def test_exceedance_count_examples():
    v = np.array([1.0, 2.0, 3.0])
    assert exceedance_count(v, 2.0) == 1
    assert exceedance_count(v, v.min() - 1) == 3


@settings(max_examples=300, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 40), elements=st.floats(-1e3, 1e3, allow_nan=False)),
    st.floats(-1e3, 1e3, allow_nan=False),
    st.data(),
)
def test_exceedance_duality(v, t, data):
    k = data.draw(st.integers(1, v.size))
    assert (kth_order_stat(v, k) <= t) == (exceedance_count(v, t) <= k - 1)


def test_duality_on_realized_values(rng):
    # thresholds equal to entries exercise the strict inequality
    v = rng.integers(0, 5, size=20).astype(float)
    for t in np.unique(v):
        for k in range(1, 21):
            assert (kth_order_stat(v, k) <= t) == (exceedance_count(v, t) <= k - 1)


def test_factorial_moment_examples():
    assert factorial_moment_estimate([3], 2) == 3
    assert factorial_moment_estimate([0, 1], 1) == 0.5
    assert factorial_moment_estimate([1, 0, 4], 3) == pytest.approx(4 / 3)


def test_factorial_moment_binomial(rng):
    N = rng.binomial(10, 0.3, size=10**5)
    est = factorial_moment_estimate(N, 2)
    se = np.std(N * (N - 1) / 2) / math.sqrt(N.size)
    assert abs(est - 45 * 0.09) <= 4 * se


def test_factorial_moments_reproduce_tail_probability(rng):
    counts = rng.integers(0, 13, size=500)
    for k in range(1, 6):
        full = max(int(counts.max()), k)
        total = sum(
            (-1) ** (s - k) * math.comb(s - 1, k - 1) * factorial_moment_estimate(counts, s) for s in range(k, full + 1)
        )
        assert total == pytest.approx(np.mean(counts >= k), abs=1e-9)
        # integer form of the same identity
        assert all(inclusion_exclusion_indicator(int(N), k, full)[0] == int(N >= k) for N in counts)


@pytest.mark.parametrize("values,p,expected", [([1, 2, 3, 4, 5], 0.5, 3), ([7], 0.01, 7), ([7], 1.0, 7), ([4, 1, 3, 2], 0.25, 1)])
def test_ecdf_quantile_examples(values, p, expected):
    assert ecdf_quantile(values, p) == expected


def test_ecdf_quantile_index_by_linear_scan(rng):
    B = 499
    v = rng.standard_normal(B)
    s = np.sort(v)
    assert quantile_index(B, 0.9) == 450
    scan = next(x for x in s if np.mean(v <= x) >= 0.9)
    assert ecdf_quantile(v, 0.9) == scan == s[449]


def test_quantile_index_float_guard():
    assert quantile_index(10, 0.9) == 9
    assert quantile_index(100, 0.95) == 95
    assert quantile_index(3, 0.001) == 1


def test_ecdf_quantile_empty():
    with pytest.raises(EmptyInput):
        ecdf_quantile([], 0.5)


@settings(max_examples=200, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 50), elements=st.floats(-10, 10, allow_nan=False)),
    st.floats(1e-6, 1.0),
    st.floats(1e-6, 1.0),
)
def test_ecdf_quantile_monotone_and_realized(v, p1, p2):
    lo, hi = sorted((p1, p2))
    a, b = ecdf_quantile(v, lo), ecdf_quantile(v, hi)
    assert a <= b
    assert a in v and b in v
    assert np.mean(v <= a) >= lo - 1e-12
