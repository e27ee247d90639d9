"""Multiplier laws and the single- and double-level bootstrap engines."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, InvalidSecondLevelLaw, DomainError
from .stats_core import ecdf_quantile, kth_order_stat

# rows of multipliers handled per matrix product; bounds peak memory
CHUNK_ROWS = 4096


class Kind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    MAMMEN = "mammen"
    RADEMACHER = "rademacher"
    BETA = "beta"


SQRT5 = math.sqrt(5.0)
MAMMEN_HI = (1.0 + SQRT5) / 2.0
MAMMEN_LO = -(SQRT5 - 1.0) / 2.0
MAMMEN_P_HI = (SQRT5 - 1.0) / (2.0 * SQRT5)


def beta_shapes(nu: float) -> tuple[float, float]:
    """Shapes ``(a, b)`` of the Beta law whose standardization has unit skewness."""
    c = nu * nu + 20.0 * nu + 20.0
    r = (nu + 2.0) / math.sqrt(c)
    return 0.5 * nu * (1.0 - r), 0.5 * nu * (1.0 + r)


@dataclass(frozen=True)
class MultiplierLaw:
    """Law of the bootstrap multipliers ``w_i`` (mean 0, variance 1).

    ``gamma`` is the analytic third moment ``E w^3``.
    """

    kind: Kind
    nu: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.BETA and self.nu <= 0:
            raise DomainError("nu must be positive")

    @property
    def moments(self) -> tuple[float, float, float]:
        """Exact ``(E w, E w^2, E w^3)``."""
        if self.kind is Kind.MAMMEN:
            p = MAMMEN_P_HI
            return tuple(p * MAMMEN_HI**r + (1 - p) * MAMMEN_LO**r for r in (1, 2, 3))
        if self.kind is Kind.BETA:
            a, b = beta_shapes(self.nu)
            skew = 2.0 * (b - a) * math.sqrt(a + b + 1.0) / ((a + b + 2.0) * math.sqrt(a * b))
            return 0.0, 1.0, skew
        return 0.0, 1.0, 0.0

    @property
    def gamma(self) -> float:
        return self.moments[2]

    @property
    def fourth_moment(self) -> float:
        if self.kind is Kind.GAUSSIAN:
            return 3.0
        if self.kind is Kind.RADEMACHER:
            return 1.0
        if self.kind is Kind.MAMMEN:
            p = MAMMEN_P_HI
            return p * MAMMEN_HI**4 + (1 - p) * MAMMEN_LO**4
        a, b = beta_shapes(self.nu)
        s = a + b
        kurt_excess = 6.0 * ((a - b) ** 2 * (s + 1) - a * b * (s + 2)) / (a * b * (s + 2) * (s + 3))
        return kurt_excess + 3.0

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind is Kind.GAUSSIAN:
            return rng.standard_normal(size)
        if self.kind is Kind.RADEMACHER:
            return 2.0 * rng.integers(0, 2, size=size) - 1.0
        if self.kind is Kind.MAMMEN:
            hi = rng.random(size) < MAMMEN_P_HI
            return np.where(hi, MAMMEN_HI, MAMMEN_LO)
        a, b = beta_shapes(self.nu)
        mean = a / (a + b)
        sd = math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1.0)))
        return (rng.beta(a, b, size) - mean) / sd

    def __str__(self):
        return f"beta({self.nu})" if self.kind is Kind.BETA else self.kind.value


GAUSSIAN = MultiplierLaw(Kind.GAUSSIAN)
MAMMEN = MultiplierLaw(Kind.MAMMEN)
RADEMACHER = MultiplierLaw(Kind.RADEMACHER)
BETA = MultiplierLaw(Kind.BETA, 0.1)


def sample_multiplier(law: MultiplierLaw, rng: np.random.Generator) -> float:
    return float(law.sample(rng))


@dataclass
class BootstrapDraws:
    """Sorted replicate statistics ``T*_{n,[k]}``."""

    stats: np.ndarray
    k: int
    law: MultiplierLaw | str
    lineage: tuple = field(default=())

    @property
    def B(self) -> int:
        return self.stats.size

    def cdf(self, t) -> np.ndarray:
        """Bootstrap CDF ``P*(T* <= t)``."""
        return np.searchsorted(self.stats, t, side="right") / self.B

    def quantile(self, p: float) -> float:
        return critical_value(self, p)


def _centered(X) -> np.ndarray:
    X = np.asarray(getattr(X, "values", X), dtype=float)
    return X - X.mean(axis=0)


def _kth_of_products(W: np.ndarray, resid: np.ndarray, k: int) -> np.ndarray:
    n = resid.shape[0]
    out = np.empty(W.shape[0])
    for lo in range(0, W.shape[0], CHUNK_ROWS):
        S = W[lo : lo + CHUNK_ROWS] @ resid
        out[lo : lo + CHUNK_ROWS] = kth_order_stat(S, k, axis=1)
    return out / math.sqrt(n)


def wild_bootstrap_draws(X, law: MultiplierLaw, B: int, k: int, rng: np.random.Generator) -> BootstrapDraws:
    """``B`` replicates of the k-th largest coordinate of ``n^{-1/2} sum w_i (X_i - Xbar)``.

    Replicate ``b`` uses row ``b`` of a ``(B, n)`` multiplier matrix, so
    multiplier ``w_i`` is always attached to observation ``i``.
    """
    if B < 1:
        raise DomainError("B must be >= 1")
    resid = _centered(X)
    W = law.sample(rng, (B, resid.shape[0]))
    stats = np.sort(_kth_of_products(W, resid, k))
    return BootstrapDraws(stats, k, law)


def empirical_bootstrap_draws(X, B: int, k: int, rng: np.random.Generator) -> BootstrapDraws:
    """Nonparametric bootstrap: resample rows with replacement, center at the original mean."""
    if B < 1:
        raise DomainError("B must be >= 1")
    resid = _centered(X)
    n = resid.shape[0]
    idx = rng.integers(0, n, size=(B, n))
    # counts[b, i] = multiplicity of row i in resample b
    flat = (idx + n * np.arange(B)[:, None]).ravel()
    counts = np.bincount(flat, minlength=B * n).reshape(B, n).astype(float)
    stats = np.sort(_kth_of_products(counts, resid, k))
    return BootstrapDraws(stats, k, "empirical")


def critical_value(draws: BootstrapDraws, p: float) -> float:
    """``inf{t : F_hat(t) >= p}`` over the replicate statistics."""
    if draws.B == 0:
        raise EmptyInput("no bootstrap replicates")
    return ecdf_quantile(draws.stats, p, presorted=True)


@dataclass
class DoubleBootOutcome:
    beta_hat: float
    critical: float
    u_values: np.ndarray
    outer: BootstrapDraws

    def rejects(self, T: float) -> bool:
        return T >= self.critical


def double_bootstrap(
    X,
    law1: MultiplierLaw,
    law2: MultiplierLaw,
    B1: int,
    B2: int,
    alpha: float,
    k: int,
    rng: np.random.Generator,
    inner_rng: np.random.Generator | None = None,
) -> DoubleBootOutcome:
    """Prepivoted double wild bootstrap.

    For outer replicate ``b`` the first-level array is ``X*_i = w_i (X_i - Xbar)``;
    the inner statistic uses ``n^{-1/2} sum v_i (X*_i - Xbar*)``.  Each outer
    statistic is prepivoted by its inner CDF, ``u_b = #{T** <= T*_b} / B2``;
    the calibrated level ``beta_hat`` is the ``1 - alpha`` generalized
    quantile of the ``u_b`` and the critical value is the ``beta_hat``
    quantile of the outer replicates.
    """
    if abs(law2.gamma - 1.0) > 1e-9:
        raise InvalidSecondLevelLaw(f"second-level law {law2} has E v^3 = {law2.gamma}")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if B1 < 1 or B2 < 1:
        raise DomainError("B1 and B2 must be >= 1")
    if inner_rng is None:
        inner_rng = rng.spawn(1)[0]
    resid = _centered(X)
    n = resid.shape[0]
    rootn = math.sqrt(n)
    W = law1.sample(rng, (B1, n))
    outer_sums = W @ resid  # sum_i X*_i, one row per outer replicate
    t_outer = kth_order_stat(outer_sums, k, axis=1) / rootn
    u = np.empty(B1)
    per_chunk = max(1, CHUNK_ROWS // B2)
    for lo in range(0, B1, per_chunk):
        hi = min(B1, lo + per_chunk)
        V = law2.sample(inner_rng, (hi - lo, B2, n))
        xbar_star = outer_sums[lo:hi] / n
        # sum_i v_i (w_i r_i - xbar*) = (v * w) @ r - (sum_i v_i) xbar*
        S = (V * W[lo:hi, None, :]).reshape(-1, n) @ resid
        S = S.reshape(hi - lo, B2, -1) - V.sum(axis=2)[:, :, None] * xbar_star[:, None, :]
        t_inner = kth_order_stat(S, k, axis=2) / rootn
        u[lo:hi] = np.mean(t_inner <= t_outer[lo:hi, None], axis=1)
    beta_hat = ecdf_quantile(u, 1.0 - alpha)
    outer = BootstrapDraws(np.sort(t_outer), k, law1)
    return DoubleBootOutcome(beta_hat, critical_value(outer, beta_hat), u, outer)


@dataclass
class ArrayConditionReport:
    max_sup_norm: float
    min_eig_by_size: dict
    gershgorin_by_size: dict
    max_cov_dev: float
    subsets_checked: int
    sup_norm_ok: bool | None
    eig_ok: bool
    cov_dev_ok: bool | None


def gershgorin_interval(A: np.ndarray) -> tuple[float, float]:
    """Interval containing every eigenvalue of the symmetric matrix ``A``."""
    A = np.asarray(A, dtype=float)
    diag = np.diag(A)
    radius = np.abs(A).sum(axis=1) - np.abs(diag)
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def validate_array_conditions(
    array,
    Sigma,
    k0: int,
    sigma_star: float,
    subset_budget: int = 200,
    rng: np.random.Generator | None = None,
    *,
    L_n: float | None = None,
    r_n: float | None = None,
) -> ArrayConditionReport:
    """Check the deterministic-array conditions on a sample of index sets.

    Checks ``max_i |a_i|_inf`` against ``L_n``, the smallest eigenvalue of
    each sampled Gram matrix ``n^{-1} sum P_I a_i (P_I a_i)^T`` against
    ``sigma_star^2 / 2``, and its max-norm distance to ``Sigma_II`` against
    ``r_n``.  Sets are all contiguous windows of size ``min(k0, d)`` plus
    ``subset_budget`` random sets of random size; exhaustive enumeration is
    used instead when it is cheaper.
    """
    a = np.asarray(array, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    n, d = a.shape
    rng = np.random.default_rng(0) if rng is None else rng
    gram = a.T @ a / n
    smax = max(1, min(k0, d))

    total = sum(math.comb(d, s) for s in range(1, smax + 1))
    if total <= subset_budget + d:
        subsets = [c for s in range(1, smax + 1) for c in itertools.combinations(range(d), s)]
    else:
        subsets = [tuple(range(j, j + smax)) for j in range(d - smax + 1)]
        for _ in range(subset_budget):
            s = int(rng.integers(1, smax + 1))
            subsets.append(tuple(sorted(rng.choice(d, size=s, replace=False))))

    min_eig: dict[int, float] = {}
    gersh: dict[int, tuple[float, float]] = {}
    max_dev = 0.0
    for I in subsets:
        ix = np.ix_(I, I)
        G = gram[ix]
        lam = float(np.linalg.eigvalsh(G)[0])
        s = len(I)
        min_eig[s] = min(min_eig.get(s, math.inf), lam)
        lo, hi = gershgorin_interval(G)
        old = gersh.get(s, (math.inf, -math.inf))
        gersh[s] = (min(old[0], lo), max(old[1], hi))
        max_dev = max(max_dev, float(np.max(np.abs(G - Sigma[ix]))))

    sup = float(np.max(np.abs(a))) if a.size else 0.0
    return ArrayConditionReport(
        max_sup_norm=sup,
        min_eig_by_size=dict(sorted(min_eig.items())),
        gershgorin_by_size=dict(sorted(gersh.items())),
        max_cov_dev=max_dev,
        subsets_checked=len(subsets),
        sup_norm_ok=None if L_n is None else sup <= L_n,
        eig_ok=min(min_eig.values()) >= 0.5 * sigma_star**2,
        cov_dev_ok=None if r_n is None else max_dev <= r_n,
    )
