"""Block construction and explicit remainder for exponentially mixing Gaussian sequences.

Indices are 0-based Python ranges: main block ``r`` covers
``[r (m + l), r (m + l) + m)`` and its gap the following ``l`` positions.
``d`` may be a huge Python ``int``; everything except the explicit index
ranges is computed arithmetically and all tail terms in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import gaussian_reference as gref
from .errors import DegenerateLayout, DomainError, LengthError
from .rng import as_generator
from .sampling import norm_sf, norm_ppf, sample_ar1_path


def dependence_params(sigma_star: float, sigma_bar: float) -> tuple[float, float]:
    """``(theta_star, beta_star)`` with ``theta_star = 1 - sigma_star^2 / sigma_bar^2``."""
    if not 0.0 < sigma_star <= sigma_bar:
        raise DomainError(f"need 0 < sigma_star <= sigma_bar, got {sigma_star}, {sigma_bar}")
    theta = 1.0 - (sigma_star / sigma_bar) ** 2
    return theta, (1.0 - theta) / (1.0 + theta)


@dataclass(frozen=True)
class MixingParams:
    C_alpha: float
    a_alpha: float
    sigma_star: float
    sigma_bar: float
    d: int
    n: int
    k0: int
    k: int = 1
    eps: float = 0.1

    def __post_init__(self):
        if self.C_alpha < 1:
            raise DomainError("C_alpha must be >= 1")
        if not self.a_alpha > 0:
            raise DomainError("a_alpha must be positive")
        if self.d < 1 or self.n < 1 or self.k0 < 1 or self.k < 1:
            raise DomainError("d, n, k0 and k must be positive")
        if not 0.0 < self.eps < 0.5:
            raise DomainError("eps must lie in (0, 1/2)")
        dependence_params(self.sigma_star, self.sigma_bar)

    @property
    def theta_star(self) -> float:
        return dependence_params(self.sigma_star, self.sigma_bar)[0]

    @property
    def beta_star(self) -> float:
        return dependence_params(self.sigma_star, self.sigma_bar)[1]

    @classmethod
    def for_ar1(cls, rho: float, d: int, n: int, k0: int, k: int = 1, eps: float = 0.1, sigma: float = 1.0):
        """Parameters for a stationary AR(1): ``a_alpha = -log|rho|``, ``C_alpha = 1``.

        Every 2x2 principal submatrix has smallest eigenvalue at least
        ``sigma^2 (1 - |rho|)``, which gives ``theta_star = |rho|``.
        """
        a = math.inf if rho == 0 else -math.log(abs(rho))
        return cls(1.0, a, sigma * math.sqrt(1.0 - abs(rho)), sigma, d, n, k0, k, eps)


def _ceil_pow(d: int, e: float) -> int:
    x = float(d) ** e
    r = round(x)
    # exact integer powers such as 10000 ** 0.25 must not round up
    if abs(x - r) <= 1e-9 * max(1.0, x):
        return int(r)
    return math.ceil(x)


@dataclass(frozen=True)
class BlockLayout:
    d: int
    m_d: int
    ell_d: int
    q_d: int
    s_d: int

    @property
    def period(self) -> int:
        return self.m_d + self.ell_d

    @property
    def degenerate(self) -> bool:
        return self.q_d == 0

    def main_block(self, r: int) -> range:
        if not 0 <= r < self.q_d:
            raise IndexError(r)
        lo = r * self.period
        return range(lo, lo + self.m_d)

    def gap(self, r: int) -> range:
        if not 0 <= r < self.q_d:
            raise IndexError(r)
        lo = r * self.period + self.m_d
        return range(lo, lo + self.ell_d)

    @property
    def remainder(self) -> range:
        return range(self.q_d * self.period, self.d)

    @property
    def main_blocks(self) -> list[range]:
        return [self.main_block(r) for r in range(self.q_d)]

    @property
    def gaps(self) -> list[range]:
        return [self.gap(r) for r in range(self.q_d)]


def block_lengths(params: MixingParams) -> tuple[int, int]:
    """``(m_d, l_d)`` with ``m_d = ceil(d^{beta*/4})``."""
    d = params.d
    m = _ceil_pow(d, params.beta_star / 4.0)
    num = 8.0 * (params.k0 + 2) * math.log(2 * d) + 8.0 * math.log(params.n)
    ell = 0 if math.isinf(params.a_alpha) else math.ceil(num / params.a_alpha)
    return m, ell


def block_layout(params: MixingParams) -> BlockLayout:
    """Main blocks of length ``m_d`` separated by gaps of length ``l_d``.

    A layout with ``q_d = 0`` is returned with ``degenerate`` set; callers
    that need a block decide whether that is fatal.
    """
    m, ell = block_lengths(params)
    q = params.d // (m + ell)
    return BlockLayout(params.d, m, ell, q, params.d - q * (m + ell))


class RemainderBreakdown(NamedTuple):
    eta1: float
    inv_qd: float
    mixing_term: float
    poisson_tail: float
    r_d: float
    log10_mixing_term: float
    log10_poisson_tail: float


def log_alpha_bound(params: MixingParams, ell: int) -> float:
    """``log(C_alpha e^{-a_alpha l})``, the assumed strong-mixing bound at lag ``l``."""
    if math.isinf(params.a_alpha):
        return -math.inf
    return math.log(params.C_alpha) - params.a_alpha * ell


def eta1(params: MixingParams, layout: BlockLayout) -> float:
    d, b = params.d, params.beta_star
    m, ell = layout.m_d, layout.ell_d
    tail = d ** (-0.75 * b) / math.sqrt(math.log(d)) if d > 1 else math.inf
    return ell / m + (m + ell) / d + tail


def remainder_rd(params: MixingParams, layout: BlockLayout | None = None, *, allow_degenerate: bool = False) -> RemainderBreakdown:
    """Explicit remainder ``r_d = eta_1 + 1/q_d + d^{k0+1} alpha(l_d) + (3 Lambda)^{k0+1} / (k0+1)!``.

    ``alpha(l_d)`` is replaced by its bound ``C_alpha exp(-a_alpha l_d)``.
    Raises :class:`DegenerateLayout` when ``q_d = 0`` unless
    ``allow_degenerate``, in which case ``inv_qd`` and ``r_d`` are ``inf``.
    """
    layout = block_layout(params) if layout is None else layout
    if layout.degenerate and not allow_degenerate:
        raise DegenerateLayout(f"q_d = 0 for d={params.d} (m_d={layout.m_d}, l_d={layout.ell_d})")
    e1 = eta1(params, layout)
    inv_q = math.inf if layout.degenerate else 1.0 / layout.q_d
    log_mix = (params.k0 + 1) * math.log(params.d) + log_alpha_bound(params, layout.ell_d)
    lam = gref.solve_lambda_eps(params.k, params.eps)
    log_pt = (params.k0 + 1) * math.log(3.0 * lam) - math.lgamma(params.k0 + 2)
    mix, pt = math.exp(log_mix), math.exp(log_pt)
    ln10 = math.log(10.0)
    return RemainderBreakdown(e1, inv_q, mix, pt, e1 + inv_q + mix + pt, log_mix / ln10, log_pt / ln10)


def rate_scan(ns, c: float, *, k: int = 2, eps: float = 0.1, a_alpha: float = 1.0, C_alpha: float = 1.0, A: float = 8.0):
    """``n * r_d`` along ``d = n^c`` with ``beta_star = 1`` and ``k0 = ceil(A log n)``."""
    out = []
    for n in ns:
        d = int(round(n**c)) if n**c < 2**53 else int(n) ** int(c) if float(c).is_integer() else int(n**c)
        k0 = math.ceil(A * math.log(n))
        p = MixingParams(C_alpha, a_alpha, 1.0, 1.0, d, n, k0, k, eps)
        out.append((n, d, k0, n * remainder_rd(p).r_d))
    return out


def cluster_tail_bound(m: int, t: float, sigma: float, theta_star: float) -> tuple[float, float]:
    """Bound on ``P(Z_j > t for all j in I)``, ``|I| = m``, and its Mills-ratio form."""
    if m < 2 or t <= 0 or sigma <= 0 or not 0.0 <= theta_star < 1.0:
        raise DomainError("need m >= 2, t > 0, sigma > 0 and theta_star in [0, 1)")
    spread = 1.0 + (m - 1) * theta_star
    u = math.sqrt(m / spread) * t / sigma
    mills = sigma * math.sqrt(spread) / (math.sqrt(2 * math.pi * m) * t) * math.exp(-m * t * t / (2 * sigma**2 * spread))
    return float(norm_sf(u)), mills


def bad_event_bound(layout: BlockLayout, t: float, sigma: float, theta_star: float) -> float:
    """Bound on ``P(N_d(t) != S_d(t))``: exceedances in gaps or remainder, or two in a block."""
    p = float(norm_sf(t / sigma))
    pair = float(norm_sf(math.sqrt(2.0 / (1.0 + theta_star)) * t / sigma))
    return (layout.q_d * layout.ell_d + layout.s_d) * p + layout.q_d * math.comb(layout.m_d, 2) * pair


class BlockComparison(NamedTuple):
    N_d: np.ndarray | int
    S_d: np.ndarray | int
    mismatch: np.ndarray | bool
    event_mismatch: np.ndarray | bool


def block_exceedance_compare(path, layout: BlockLayout, t: float, k: int = 1) -> BlockComparison:
    """Raw exceedance count versus the number of main blocks with an exceedance.

    ``path`` is one sequence or a ``(paths, length)`` array.  ``event_mismatch``
    flags paths where ``{N_d <= k-1}`` and ``{S_d <= k-1}`` disagree.
    """
    z = np.asarray(path, dtype=float)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    need = layout.q_d * layout.period
    if z.shape[1] < need:
        raise LengthError(f"path length {z.shape[1]} < q_d (m_d + l_d) = {need}")
    N = np.sum(z > t, axis=1)
    if layout.q_d:
        blocks = z[:, :need].reshape(z.shape[0], layout.q_d, layout.period)[:, :, : layout.m_d]
        S = np.sum(blocks.max(axis=2) > t, axis=1)
    else:
        S = np.zeros(z.shape[0], dtype=int)
    mis = N != S
    ev = (N <= k - 1) != (S <= k - 1)
    if single:
        return BlockComparison(int(N[0]), int(S[0]), bool(mis[0]), bool(ev[0]))
    return BlockComparison(N, S, mis, ev)


@dataclass
class WindowCheckReport:
    t: np.ndarray
    lam: np.ndarray
    gk_hat: np.ndarray
    gk_se: np.ndarray
    poisson: np.ndarray
    gap: np.ndarray
    exact_gap: np.ndarray | None
    rd_bound: float
    layout: BlockLayout

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gap))


def poisson_window_check(
    rho: float,
    sigma: float,
    d: int,
    k: int,
    eps: float,
    reps: int,
    rng=None,
    *,
    n: int = 200,
    k0: int = 10,
    C: float = 1.0,
    grid: int = 7,
    chunk: int = 2000,
) -> WindowCheckReport:
    """Simulated ``G_k(t)`` on stationary AR(1) paths against ``h_k(lambda(t))``.

    The t-grid spans the Poisson window ``lambda in [h_k^{-1}(1 - eps/2),
    h_k^{-1}(eps/2)]`` with ``lambda(t) = d Phi_bar(t / sigma)``.  The bound
    column is ``C r_d`` with AR(1) mixing parameters (degenerate layouts
    give ``inf``).
    """
    rng = as_generator(rng)

    def lam_at(p):
        hi = 1.0
        while gref.hk(k, hi) > p:
            hi *= 2
        return gref.bisect(lambda x: gref.hk(k, x) - p, 0.0, hi)

    lam = np.linspace(lam_at(1.0 - eps / 2.0), lam_at(eps / 2.0), grid)
    t = sigma * norm_ppf(1.0 - lam / d)
    hits = np.zeros(grid)
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        Z = sample_ar1_path(d, rho, sigma, rng, size=m)
        T = np.partition(Z, d - k, axis=1)[:, d - k]
        hits += np.sum(T[:, None] <= t[None, :], axis=0)
        done += m
    g = hits / reps
    se = np.sqrt(g * (1 - g) / reps)
    pois = gref.hk(k, lam)
    exact = None
    if rho == 0:
        exact = np.array([gref.binomial_poisson_gap(d, k, float(x)) for x in lam])
    params = MixingParams.for_ar1(rho, d, n, k0, k, eps, sigma)
    layout = block_layout(params)
    rd = remainder_rd(params, layout, allow_degenerate=True).r_d
    return WindowCheckReport(t, lam, g, se, pois, np.abs(g - pois), exact, C * rd, layout)


def corr_decay_bound(h, C_alpha: float, a_alpha: float):
    """``2 pi C_alpha exp(-a_alpha h)``, the correlation bound implied by the mixing rate."""
    return 2.0 * math.pi * C_alpha * np.exp(-a_alpha * np.asarray(h, dtype=float))
