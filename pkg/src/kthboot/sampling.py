"""Correlation designs, Cholesky factors and the gamma-copula data generator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import special, signal

from .errors import DomainError, InvalidRho, NonPositiveDefinite
from .rng import as_generator

PIVOT_TOL = 1e-12


class Family(str, enum.Enum):
    EQUICORR = "equicorr"
    AR1 = "ar1"
    EXPLICIT = "explicit"


class Case(str, enum.Enum):
    ASYMMETRIC = "asymmetric"
    SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class CorrelationSpec:
    """A correlation design.

    ``EQUICORR`` is ``rho * 1 1^T + (1 - rho) I`` (Design I), ``AR1`` is
    ``rho ** |j - k|`` (Design II).  ``EXPLICIT`` passes ``explicit`` through
    after validation.
    """

    family: Family
    d: int
    rho: float = 0.0
    explicit: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.d < 1:
            raise DomainError(f"d must be positive, got {self.d}")
        if self.family is Family.EQUICORR and not 0.0 <= self.rho < 1.0:
            raise InvalidRho(f"equicorrelation needs rho in [0, 1), got {self.rho}")
        if self.family is Family.AR1 and not -1.0 < self.rho < 1.0:
            raise InvalidRho(f"AR(1) needs |rho| < 1, got {self.rho}")
        if self.family is Family.EXPLICIT and self.explicit is None:
            raise DomainError("explicit family requires a matrix")

    @classmethod
    def design(cls, design: str, rho: float, d: int) -> "CorrelationSpec":
        """Design ``"I"`` (equicorrelated) or ``"II"`` (AR(1) Toeplitz)."""
        fam = {"I": Family.EQUICORR, "II": Family.AR1}[str(design).upper()]
        return cls(fam, d, rho)


@dataclass(frozen=True)
class CholeskyFactor:
    L: np.ndarray

    @property
    def d(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class DataMatrix:
    values: np.ndarray
    case: Case
    theta: float
    seed: int | None = None
    spec: CorrelationSpec | None = None
    marginal: str = "gamma"

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def build_correlation(spec: CorrelationSpec) -> np.ndarray:
    d = spec.d
    if spec.family is Family.EQUICORR:
        R = np.full((d, d), spec.rho)
        np.fill_diagonal(R, 1.0)
        return R
    if spec.family is Family.AR1:
        lags = np.abs(np.subtract.outer(np.arange(d), np.arange(d)))
        # 0 ** 0 == 1 keeps the diagonal exact for rho = 0
        return np.power(float(spec.rho), lags)
    R = np.array(spec.explicit, dtype=float)
    if R.shape != (d, d):
        raise DomainError(f"explicit matrix has shape {R.shape}, expected {(d, d)}")
    if not np.array_equal(R, R.T):
        raise DomainError("explicit correlation matrix is not symmetric")
    if not np.all(np.diag(R) == 1.0):
        raise DomainError("explicit correlation matrix must have unit diagonal")
    return R


def cholesky(R: np.ndarray) -> CholeskyFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise DomainError("matrix must be square")
    if not np.allclose(R, R.T, rtol=0, atol=1e-14):
        raise DomainError("matrix must be symmetric")
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite(str(exc)) from None
    if np.min(np.diag(L)) ** 2 <= PIVOT_TOL:
        raise NonPositiveDefinite(f"pivot below {PIVOT_TOL}")
    return CholeskyFactor(L)


def norm_cdf(x):
    return special.ndtr(x)


def norm_sf(x):
    return special.ndtr(np.negative(x))


def norm_ppf(p):
    return special.ndtri(p)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def gamma_quantile(p, theta: float):
    """Quantile of the unit-scale gamma law with shape ``theta``.

    Vectorized over ``p``.  The upper half is inverted through the
    complemented incomplete gamma so that tail quantiles keep full precision.
    """
    p = np.asarray(p, dtype=float)
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    if np.any((p <= 0) | (p >= 1)) or np.any(np.isnan(p)):
        raise DomainError("p must lie in (0, 1)")
    out = np.where(
        p <= 0.5,
        special.gammaincinv(theta, p),
        special.gammainccinv(theta, 1.0 - p),
    )
    return out if out.ndim else float(out)


def _gamma_from_normal(z: np.ndarray, theta: float) -> np.ndarray:
    """``F_theta^{-1}(Phi(z))`` without forming ``Phi(z)`` in the upper tail."""
    if theta == 1.0:
        # exponential: -log(1 - Phi(z)) = -log Phi(-z)
        return -special.log_ndtr(-z)
    if theta == 0.5:
        # chi-square(1) / 2: the quantile at p is erfinv(p)^2
        half = np.empty_like(z)
        lo = z <= 0
        half[lo] = special.erfinv(special.ndtr(z[lo])) ** 2
        half[~lo] = 0.5 * special.ndtri(0.5 * special.ndtr(-z[~lo])) ** 2
        return half
    lower = z <= 0
    out = np.empty_like(z)
    out[lower] = special.gammaincinv(theta, special.ndtr(z[lower]))
    out[~lower] = special.gammainccinv(theta, special.ndtr(-z[~lower]))
    return out


def latent_gaussian(n: int, factor: CholeskyFactor, rng) -> np.ndarray:
    """``n`` rows of ``N(0, L L^T)``, row ``i`` equal to ``L @ eps_i``."""
    eps = rng.standard_normal((n, factor.d))
    return eps @ factor.L.T


def sample_copula_gamma(
    n: int,
    spec: CorrelationSpec,
    theta: float,
    case: Case | str,
    seed=None,
    *,
    factor: CholeskyFactor | None = None,
    allow_theta_override: bool = False,
    marginal: str = "gamma",
) -> DataMatrix:
    """Draw centered data from the Gaussian copula with gamma marginals.

    Asymmetric case: ``X = U - 1`` with ``theta = 1``.  Symmetric case:
    ``X = U - U'`` from two independent copula draws with the same
    correlation.  ``marginal="normal"`` skips the gamma transform and returns
    the latent Gaussian rows (used for exact-normal sanity runs).
    """
    case = Case(case)
    if theta <= 0:
        raise DomainError(f"theta must be positive, got {theta}")
    if case is Case.ASYMMETRIC and theta != 1.0 and not allow_theta_override:
        raise DomainError("the asymmetric design uses theta = 1")
    rng = as_generator(seed)
    if factor is None:
        factor = cholesky(build_correlation(spec))
    if marginal == "normal":
        X = latent_gaussian(n, factor, rng)
    elif marginal == "gamma":
        U = _gamma_from_normal(latent_gaussian(n, factor, rng), theta)
        if case is Case.ASYMMETRIC:
            X = U - theta
        else:
            X = U - _gamma_from_normal(latent_gaussian(n, factor, rng), theta)
    else:
        raise DomainError(f"unknown marginal {marginal!r}")
    seed_val = seed if isinstance(seed, (int, np.integer)) else None
    return DataMatrix(X, case, float(theta), seed_val, spec, marginal)


def sample_ar1_path(d: int, rho: float, sigma: float = 1.0, seed=None, size=None) -> np.ndarray:
    """Stationary Gaussian AR(1) path(s) of length ``d``.

    ``Z_1 ~ N(0, sigma^2)`` and ``Z_{j+1} = rho Z_j + sigma sqrt(1 - rho^2) e_j``.
    With ``size`` given, returns an array of shape ``(size, d)``.
    """
    if not -1.0 < rho < 1.0:
        raise DomainError(f"need |rho| < 1, got {rho}")
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    rng = as_generator(seed)
    shape = (d,) if size is None else (size, d)
    e = rng.standard_normal(shape)
    e[..., 1:] *= np.sqrt(1.0 - rho * rho)
    z = signal.lfilter([1.0], [1.0, -rho], e, axis=-1)
    return sigma * z
