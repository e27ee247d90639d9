"""Gaussian reference law of the k-th largest coordinate.

Closed forms for independent coordinates, the Poisson approximation
``h_k(lambda(t))``, Monte Carlo oracles for general correlation, and the
comparison and truncation bounds used by the diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from .errors import DomainError
from .sampling import cholesky, norm_pdf, norm_sf
from .stats_core import exceedance_count, kth_order_stat

BISECT_TOL = 1e-12
BISECT_MAXITER = 200
MC_CHUNK = 20000


def bisect(f, lo: float, hi: float, tol: float = BISECT_TOL, maxiter: int = BISECT_MAXITER) -> float:
    """Root of a monotone ``f`` on ``[lo, hi]`` (``f(lo)`` and ``f(hi)`` of opposite sign)."""
    flo = f(lo)
    if flo == 0:
        return lo
    fhi = f(hi)
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0 or hi - lo < tol * max(1.0, abs(mid)):
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class GaussianMarginals:
    """Coordinate standard deviations ``sigma_j`` of the Gaussian reference vector."""

    sigmas: np.ndarray
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.sigmas, dtype=float))
        if np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise DomainError("sigmas must be positive and finite")
        if self.lower is not None and np.any(s < self.lower):
            raise DomainError("a sigma lies below the configured lower bound")
        if self.upper is not None and np.any(s > self.upper):
            raise DomainError("a sigma lies above the configured upper bound")
        object.__setattr__(self, "sigmas", s)

    @classmethod
    def equal(cls, d: int, sigma: float = 1.0) -> "GaussianMarginals":
        return cls(np.full(d, float(sigma)))

    @property
    def d(self) -> int:
        return self.sigmas.size

    @property
    def sigma_min(self) -> float:
        return float(self.sigmas.min())

    @property
    def sigma_max(self) -> float:
        return float(self.sigmas.max())


# ---------------------------------------------------------------------------
# Poisson approximation


def hk(k: int, lam):
    """``h_k(lambda) = exp(-lambda) sum_{m<k} lambda^m / m!`` (Poisson CDF at k-1)."""
    lam = np.asarray(lam, dtype=float)
    if k < 1:
        raise DomainError("k must be >= 1")
    if np.any(lam < 0):
        raise DomainError("lambda must be nonnegative")
    out = special.pdtr(k - 1, lam)
    return out if out.ndim else float(out)


def hk_prime(k: int, lam):
    """``d h_k / d lambda = -exp(-lambda) lambda^(k-1) / (k-1)!``."""
    lam = np.asarray(lam, dtype=float)
    out = -np.exp(-lam + (k - 1) * np.log(np.where(lam > 0, lam, 1.0)) - special.gammaln(k))
    out = np.where(lam > 0, out, -1.0 if k == 1 else 0.0)
    return out if out.ndim else float(out)


def solve_lambda_eps(k: int, eps: float) -> float:
    """The unique ``Lambda`` with ``h_k(Lambda) = eps / 8``."""
    if not 0.0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    target = eps / 8.0
    hi = 1.0
    while hk(k, hi) > target:
        hi *= 2.0
    return bisect(lambda x: hk(k, x) - target, 0.0, hi, tol=1e-15)


def lambda_t(t, marg: GaussianMarginals):
    """Expected exceedance count ``sum_j P(Z_j > t)``."""
    t = np.asarray(t, dtype=float)
    out = norm_sf(t[..., None] / marg.sigmas).sum(axis=-1)
    return out if out.ndim else float(out)


def inclusion_exclusion_indicator(N: int, k: int, m: int) -> tuple[int, int]:
    """Truncated inclusion-exclusion sum for ``1{N >= k}`` and its Bonferroni bound.

    Returns ``(sum_{s=k}^{min(m, N)} (-1)^{s-k} C(s-1, k-1) C(N, s),
    C(m, k-1) C(N, m+1))``; exact integers.
    """
    if k < 1 or m < k or N < 0:
        raise DomainError("need N >= 0 and 1 <= k <= m")
    total = sum((-1) ** (s - k) * math.comb(s - 1, k - 1) * math.comb(N, s) for s in range(k, min(m, N) + 1))
    return total, math.comb(m, k - 1) * math.comb(N, m + 1)


def poisson_inclusion_exclusion(lam: float, k: int, k0: int) -> tuple[float, float]:
    """Truncated factorial-moment series for ``P(Poi(lam) >= k)`` and its remainder bound."""
    terms = [
        (-1) ** (s - k) * math.comb(s - 1, k - 1) * math.exp(s * math.log(lam) - math.lgamma(s + 1))
        for s in range(k, k0 + 1)
    ] if lam > 0 else [0.0]
    bound = math.comb(k0, k - 1) * math.exp((k0 + 1) * math.log(lam) - math.lgamma(k0 + 2)) if lam > 0 else 0.0
    return math.fsum(terms), bound


def weighted_poisson_sums(lam: float, k: int, k0: int) -> tuple[float, float]:
    """``(sum_{s=k}^{k0}, sum_{s>k0})`` of ``C(s-1, k-1) lam^s / s!``."""
    if lam <= 0:
        return 0.0, 0.0

    def term(s):
        return math.exp(math.log(math.comb(s - 1, k - 1)) + s * math.log(lam) - math.lgamma(s + 1))

    head = math.fsum(term(s) for s in range(k, k0 + 1))
    tail = []
    s = k0 + 1
    while True:
        v = term(s)
        tail.append(v)
        # past the mode the terms decay faster than geometrically
        if s > 2 * lam + k and (v == 0.0 or v < 1e-18 * math.fsum(tail)):
            break
        s += 1
    return head, math.fsum(tail)


# ---------------------------------------------------------------------------
# independent equal-variance coordinates


def _check_kd(k, d):
    if d < 1 or not 1 <= k <= d:
        raise DomainError(f"need 1 <= k <= d, got k={k}, d={d}")


def gk_independent(t, d: int, k: int, sigma: float = 1.0):
    """``P(T_{Z,[k]} <= t)`` for ``Z ~ N(0, sigma^2 I_d)``: a binomial CDF at k-1."""
    _check_kd(k, d)
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    p = norm_sf(np.asarray(t, dtype=float) / sigma)
    # stats.binom is accurate to ~1e-15 here; special.bdtr drifts to ~1e-13
    out = stats.binom.cdf(k - 1, d, p)
    return out if np.ndim(out) else float(out)


def _log_fk(t, d, k, sigma):
    x = np.asarray(t, dtype=float) / sigma
    return (
        math.log(d)
        + math.log(math.comb(d - 1, k - 1))
        + (k - 1) * special.log_ndtr(-x)
        + (d - k) * special.log_ndtr(x)
        - 0.5 * x * x
        - 0.5 * math.log(2 * math.pi)
        - math.log(sigma)
    )


def fk_independent(t, d: int, k: int, sigma: float = 1.0):
    """Density of ``T_{Z,[k]}`` for ``Z ~ N(0, sigma^2 I_d)``."""
    _check_kd(k, d)
    out = np.exp(_log_fk(t, d, k, sigma))
    return out if np.ndim(out) else float(out)


def fk_prime_independent(t, d: int, k: int, sigma: float = 1.0):
    """Derivative of :func:`fk_independent` in ``t``."""
    _check_kd(k, d)
    t = np.asarray(t, dtype=float)
    x = t / sigma
    g = norm_pdf(x) / sigma
    p = norm_sf(x)
    f = fk_independent(t, d, k, sigma)
    out = f * (-(k - 1) * g / p + (d - k) * g / (1.0 - p) - t / sigma**2)
    return out if np.ndim(out) else float(out)


def gk_quantile(p: float, d: int, k: int, sigma: float = 1.0) -> float:
    """``c^G_{p,k} = G_k^{-1}(p)`` by bisection."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    lo, hi = -10.0 * sigma, 10.0 * sigma
    while gk_independent(lo, d, k, sigma) > p:
        lo *= 2
    while gk_independent(hi, d, k, sigma) < p:
        hi *= 2
    return bisect(lambda t: gk_independent(t, d, k, sigma) - p, lo, hi)


class QuantileWindow(NamedTuple):
    lo: float
    hi: float
    ratio_lo: float  # t_lo^2 / log d
    ratio_hi: float


def quantile_window(k: int, eps: float, d: int, sigma: float = 1.0) -> QuantileWindow:
    """``{c^G_{p,k} : p in [eps/2, 1 - eps/2]}`` with the threshold-scale ratios ``t^2 / log d``."""
    if not 0.0 < eps < 0.5:
        raise DomainError(f"eps must lie in (0, 1/2), got {eps}")
    lo = gk_quantile(eps / 2.0, d, k, sigma)
    hi = gk_quantile(1.0 - eps / 2.0, d, k, sigma)
    logd = math.log(d) if d > 1 else float("nan")
    return QuantileWindow(lo, hi, lo * lo / logd, hi * hi / logd)


def poisson_binomial_cdf(ps, m: int) -> float:
    """``P(N <= m)`` for a sum of independent Bernoulli(``ps``)."""
    # last cell accumulates the event N > m
    dist = np.zeros(m + 2)
    dist[0] = 1.0
    for p in np.asarray(ps, dtype=float):
        new = dist * (1.0 - p)
        new[1:] += dist[:-1] * p
        new[-1] += dist[-1] * p
        dist = new
    return float(dist[: m + 1].sum())


# ---------------------------------------------------------------------------
# Monte Carlo oracles


class MCEstimate(NamedTuple):
    value: float
    se: float
    reps: int


def _covariance(R, sigmas):
    R = np.asarray(R, dtype=float)
    if sigmas is None:
        return R
    s = np.broadcast_to(np.asarray(sigmas, dtype=float), (R.shape[0],))
    return R * np.outer(s, s)


def gk_montecarlo(t, R, k: int, reps: int, rng: np.random.Generator, *, sigmas=None, via: str = "order"):
    """Monte Carlo estimate of ``P(T_{Z,[k]} <= t)`` for ``Z ~ N(0, Sigma)``.

    ``Sigma = D R D`` with ``D = diag(sigmas)`` (``R`` itself when omitted).
    ``via="exceedance"`` counts ``N_Z(t) <= k - 1`` on the same draws instead
    of comparing the order statistic.  ``t`` may be an array; the returned
    :class:`MCEstimate` then holds arrays.
    """
    L = cholesky(_covariance(R, sigmas)).L
    d = L.shape[0]
    _check_kd(k, d)
    t = np.asarray(t, dtype=float)
    hits = np.zeros(t.shape)
    done = 0
    while done < reps:
        m = min(MC_CHUNK, reps - done)
        Z = rng.standard_normal((m, d)) @ L.T
        if via == "order":
            T = kth_order_stat(Z, k, axis=1)
            hits = hits + np.sum(T[:, None] <= t.ravel()[None, :], axis=0).reshape(t.shape)
        elif via == "exceedance":
            N = np.stack([exceedance_count(Z, tt, axis=1) for tt in t.ravel()], axis=1)
            hits = hits + np.sum(N <= k - 1, axis=0).reshape(t.shape)
        else:
            raise DomainError(f"unknown via={via!r}")
        done += m
    p = hits / reps
    se = np.sqrt(p * (1 - p) / reps)
    if t.ndim == 0:
        return MCEstimate(float(p), float(se), reps)
    return MCEstimate(p, se, reps)


def binomial_poisson_gap(d: int, k: int, lam: float) -> float:
    """``|P(Bin(d, lam/d) <= k-1) - h_k(lam)|``, exact."""
    return abs(float(stats.binom.cdf(k - 1, d, lam / d)) - hk(k, lam))


@dataclass
class PoissonGapReport:
    t: float
    lam: float
    gk: float
    gk_se: float
    gap: float
    bound: float
    exact: bool
    exceeds: bool


def poisson_gap(
    t: float,
    marg: GaussianMarginals,
    k: int,
    R,
    reps: int,
    rng: np.random.Generator,
    C: float = 1.0,
) -> PoissonGapReport:
    """Compare ``G_k(t)`` with ``h_k(lambda(t))`` and the aggregation bound.

    The bound is ``C (d^{-a} (log d)^{-1/2} + rho_d log d)`` with
    ``a = sigma_min^2 / sigma_max^2`` and ``rho_d`` the largest absolute
    off-diagonal covariance.  For diagonal ``R`` the law of ``N_Z(t)`` is
    Poisson-binomial and ``G_k`` is computed exactly; otherwise by Monte Carlo.
    """
    R = np.asarray(R, dtype=float)
    d = marg.d
    Sigma = _covariance(R, marg.sigmas)
    off = Sigma - np.diag(np.diag(Sigma))
    rho_d = float(np.max(np.abs(off))) if d > 1 else 0.0
    lam = lambda_t(t, marg)
    if rho_d == 0.0:
        g, se, exact = poisson_binomial_cdf(norm_sf(t / marg.sigmas), k - 1), 0.0, True
    else:
        est = gk_montecarlo(t, R, k, reps, rng, sigmas=marg.sigmas)
        g, se, exact = est.value, est.se, False
    a_sigma = marg.sigma_min**2 / marg.sigma_max**2
    logd = math.log(d)
    bound = C * (d ** (-a_sigma) / math.sqrt(logd) + rho_d * logd)
    gap = abs(g - hk(k, lam))
    return PoissonGapReport(float(t), float(lam), g, se, gap, bound, exact, gap > bound)


def berman_bound(R, u) -> float:
    """Normal comparison bound against independent coordinates.

    ``(2 pi sqrt(1 - rbar^2))^{-1} sum_{j<l} |r_jl| exp(-(u_j^2 + u_l^2) / (2 (1 + rbar)))``
    with ``rbar`` the largest absolute off-diagonal correlation.
    """
    R = np.asarray(R, dtype=float)
    u = np.asarray(u, dtype=float)
    s = R.shape[0]
    if u.shape != (s,):
        raise DomainError("u must have one entry per coordinate")
    iu = np.triu_indices(s, 1)
    r = np.abs(R[iu])
    if r.size == 0:
        return 0.0
    rbar = float(r.max())
    if rbar >= 1.0:
        raise DomainError("largest off-diagonal correlation must be < 1")
    expo = np.exp(-(u[iu[0]] ** 2 + u[iu[1]] ** 2) / (2.0 * (1.0 + rbar)))
    return float(np.sum(r * expo) / (2.0 * math.pi * math.sqrt(1.0 - rbar * rbar)))
