"""Normalized sums, order statistics, exceedance counts and ECDF quantiles."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import comb

from .errors import EmptyInput, DomainError


def normalized_sum(X) -> np.ndarray:
    """``n^{-1/2} * sum_i X_i`` over the rows of an ``(n, d)`` array."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    return X.sum(axis=0) / math.sqrt(X.shape[0])


def kth_order_stat(v, k: int, axis: int = -1):
    """The k-th largest entry along ``axis`` (ties counted with multiplicity).

    Uses a selection (``np.partition``) rather than a full sort.
    """
    v = np.asarray(v, dtype=float)
    d = v.shape[axis]
    if not 1 <= k <= d:
        raise IndexError(f"k={k} outside [1, {d}]")
    out = np.take(np.partition(v, d - k, axis=axis), d - k, axis=axis)
    return out if np.ndim(out) else float(out)


def exceedance_count(v, t, axis: int = -1):
    """Number of entries strictly above ``t``."""
    out = np.sum(np.asarray(v) > t, axis=axis)
    return out if np.ndim(out) else int(out)


def factorial_moment_estimate(counts, s: int) -> float:
    """Sample mean of ``C(N, s)`` over the observed counts."""
    if s < 1:
        raise DomainError("s must be >= 1")
    counts = np.asarray(counts)
    if counts.size == 0:
        raise EmptyInput("no counts")
    return float(np.mean(comb(counts, s, exact=False)))


def quantile_index(B: int, p: float) -> int:
    """1-based index ``ceil(p * B)`` of the generalized-inverse quantile."""
    # rounding guards products such as 0.9 * 10 = 9.000000000000002
    return max(1, math.ceil(round(p * B, 9)))


def ecdf_quantile(values, p: float, *, presorted: bool = False) -> float:
    """``inf{t : F_hat(t) >= p}`` for the empirical CDF of ``values``.

    Equals the ``ceil(p B)``-th smallest value.  ``p = 1`` is accepted and
    returns the maximum.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise EmptyInput("ecdf_quantile of an empty sample")
    if not 0.0 < p <= 1.0:
        raise DomainError(f"p must lie in (0, 1], got {p}")
    i = quantile_index(v.size, p) - 1
    if presorted:
        return float(v[i])
    return float(np.partition(v, i)[i])
