"""Edgeworth corrections to the law of the k-th largest coordinate.

For a diagonal covariance every orthant integral of a Gaussian-derivative
contraction factors over coordinates:

    int_t^inf phi_sigma^{(m)}(u) du = Phi_bar(t / sigma)       (m = 0)
                                    = -phi_sigma^{(m-1)}(t)    (m >= 1)

so the sums over index sets ``|I| = s`` reduce to coefficients of the
generating polynomial ``prod_c (1 + z f_c(y))``, where ``y`` marks the
derivative orders falling on coordinate ``c``.  The dynamic program below
extracts those coefficients in ``O(d * s_max)`` per batch element and
carries t-derivatives in forward mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from . import gaussian_reference as gref
from .errors import DomainError, NotDiagonal, WindowError
from .gaussian_reference import GaussianMarginals, MCEstimate
from .sampling import norm_pdf, norm_sf

K0_CAP = 40


def k0_rule(eps_n: float, A: float = 4.0, cap: int = K0_CAP) -> int:
    """Truncation order ``ceil(A log(1 / eps_n))``, capped for computation."""
    if not 0.0 < eps_n < 1.0:
        raise DomainError(f"eps_n must lie in (0, 1), got {eps_n}")
    return min(cap, max(1, math.ceil(A * math.log(1.0 / eps_n))))


def rate_sequences(b: float, sigma_star: float, d: int, n: int) -> tuple[float, float]:
    """``(delta_n, eps_n)`` from the sub-exponential envelope ``b`` and ``sigma_star``."""
    delta = (b / sigma_star) ** 5 * math.log(d * n) ** 3 / n
    return delta, math.sqrt(delta * math.log(n))


def gaussian_derivative(m: int, t, sigma):
    """``phi_sigma^{(m)}(t)``, the m-th derivative of the ``N(0, sigma^2)`` density."""
    sigma = np.asarray(sigma, dtype=float)
    x = np.asarray(t, dtype=float) / sigma
    return (-1) ** m * special.eval_hermitenorm(m, x) * norm_pdf(x) / sigma ** (m + 1)


def orthant_factor(m: int, t, sigma):
    """``int_t^inf phi_sigma^{(m)}(u) du``."""
    if m == 0:
        return norm_sf(np.asarray(t, dtype=float) / sigma)
    return -gaussian_derivative(m - 1, t, sigma)


def orthant_factor_dt(m: int, t, sigma):
    """t-derivative of :func:`orthant_factor`, equal to ``-phi_sigma^{(m)}(t)``."""
    return -gaussian_derivative(m, t, sigma)


def _subset_poly_sums(F, dF, s_max: int, degree: int):
    """Coefficients ``[z^s][y^degree] prod_c (1 + z f_c(y))`` for ``s = 1..s_max``.

    ``F`` has shape ``(d, batch, r + 1)``: the y-polynomial of each
    coordinate for every batch element.  ``dF`` holds the t-derivatives (or
    ``None``).  Returns arrays of shape ``(batch, s_max)``.
    """
    d, batch, r1 = F.shape
    P = np.zeros((batch, s_max + 1, r1))
    P[:, 0, 0] = 1.0
    dP = np.zeros_like(P) if dF is not None else None
    for c in range(d):
        f = F[c][:, None, :]
        prev = P[:, :-1, :]
        add = np.zeros_like(prev)
        for j in range(r1):
            add[..., j] = np.einsum("bsi,bsi->bs", prev[..., : j + 1], f[..., j::-1])
        if dF is not None:
            df = dF[c][:, None, :]
            dprev = dP[:, :-1, :]
            dadd = np.zeros_like(prev)
            for j in range(r1):
                dadd[..., j] = np.einsum("bsi,bsi->bs", dprev[..., : j + 1], f[..., j::-1]) + np.einsum(
                    "bsi,bsi->bs", prev[..., : j + 1], df[..., j::-1]
                )
            dP[:, 1:, :] += dadd
        P[:, 1:, :] += add
    out = P[:, 1:, degree]
    dout = dP[:, 1:, degree] if dF is not None else None
    return out, dout


def diagonal_tensor_sums(t, sigmas, coef, order: int, s_max: int, derivative: bool = False):
    """``sum_{|I|=s} int_{(t,inf)^s} <diag(coef), grad^order phi_I>`` for ``s = 1..s_max``.

    Returns ``(values, t_derivatives)``, each of length ``s_max``.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    coef = np.asarray(coef, dtype=float)
    F = np.empty((sigmas.size, 1, 2))
    F[:, 0, 0] = orthant_factor(0, t, sigmas)
    F[:, 0, 1] = coef * orthant_factor(order, t, sigmas)
    dF = None
    if derivative:
        dF = np.empty_like(F)
        dF[:, 0, 0] = orthant_factor_dt(0, t, sigmas)
        dF[:, 0, 1] = coef * orthant_factor_dt(order, t, sigmas)
    v, dv = _subset_poly_sums(F, dF, s_max, 1)
    return v[0], (dv[0] if derivative else None)


def sample_tensor_sums(t, sigmas, resid, s_max: int, derivative: bool = False):
    """Subset sums for the sample tensors ``n^{-1} sum_i b_i^{(x) r}``, ``r = 2, 3``.

    Returns ``(second, third, d_second, d_third)`` where ``second[s-1]`` is
    ``sum_{|I|=s} int <bbar_I^2, grad^2 phi_I>`` and likewise for ``third``.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    b = np.asarray(resid, dtype=float)
    n, d = b.shape
    h = np.stack([orthant_factor(m, t, sigmas) for m in range(4)], axis=1)  # (d, 4)
    fact = np.array([1.0, 1.0, 2.0, 6.0])
    powers = b.T[:, :, None] ** np.arange(4)  # (d, n, 4)
    F = powers * (h / fact)[:, None, :]
    dF = None
    if derivative:
        dh = np.stack([orthant_factor_dt(m, t, sigmas) for m in range(4)], axis=1)
        dF = powers * (dh / fact)[:, None, :]
    P2, dP2 = _subset_poly_sums(F[..., :3], None if dF is None else dF[..., :3], s_max, 2)
    P3, dP3 = _subset_poly_sums(F, dF, s_max, 3)
    second = 2.0 * P2.mean(axis=0)
    third = 6.0 * P3.mean(axis=0)
    if not derivative:
        return second, third, None, None
    return second, third, 2.0 * dP2.mean(axis=0), 6.0 * dP3.mean(axis=0)


@dataclass
class EdgeworthInputs:
    """Moment inputs of the Edgeworth corrections.

    ``third_cumulants`` holds ``E X_j^3`` (population) or the sample third
    moments of the centered data; ``var_devs`` the diagonal of
    ``bbar^2 - Sigma``.  When ``resid`` (the centered ``(n, d)`` sample) is
    present, the bootstrap correction uses the full sample tensors, including
    their off-diagonal entries.
    """

    third_cumulants: np.ndarray
    var_devs: np.ndarray
    gamma: float
    n: int
    k0: int
    resid: np.ndarray | None = None
    variances: np.ndarray | None = None

    def __post_init__(self):
        self.third_cumulants = np.asarray(self.third_cumulants, dtype=float)
        self.var_devs = np.asarray(self.var_devs, dtype=float)
        if self.third_cumulants.shape != self.var_devs.shape:
            raise DomainError("third_cumulants and var_devs must have equal length")
        if not (np.all(np.isfinite(self.third_cumulants)) and np.all(np.isfinite(self.var_devs))):
            raise DomainError("non-finite Edgeworth inputs")
        if self.n < 1 or self.k0 < 1:
            raise DomainError("n and k0 must be positive")

    @property
    def d(self) -> int:
        return self.third_cumulants.size

    @classmethod
    def population(cls, third_cumulants, n: int, k0: int, gamma: float = 1.0) -> "EdgeworthInputs":
        kap = np.asarray(third_cumulants, dtype=float)
        return cls(kap, np.zeros_like(kap), gamma, n, k0)

    @classmethod
    def from_sample(cls, X, variances, gamma: float, k0: int, *, full_tensor: bool = True) -> "EdgeworthInputs":
        """Sample inputs from data ``X`` and the population variances ``Sigma_jj``."""
        X = np.asarray(getattr(X, "values", X), dtype=float)
        b = X - X.mean(axis=0)
        var = np.broadcast_to(np.asarray(variances, dtype=float), (X.shape[1],)).copy()
        return cls(
            (b**3).mean(axis=0),
            (b**2).mean(axis=0) - var,
            gamma,
            X.shape[0],
            k0,
            resid=b if full_tensor else None,
            variances=var,
        )


def _check_diagonal(Sigma, marg: GaussianMarginals):
    if Sigma is None:
        return
    Sigma = np.asarray(Sigma, dtype=float)
    off = Sigma - np.diag(np.diag(Sigma))
    if np.any(off != 0):
        raise NotDiagonal("closed-form corrections need a diagonal covariance")
    if not np.allclose(np.sqrt(np.diag(Sigma)), marg.sigmas):
        raise DomainError("Sigma diagonal disagrees with the marginals")


def _check_k(k, inputs):
    if not 1 <= k <= inputs.k0:
        raise DomainError(f"need 1 <= k <= k0, got k={k}, k0={inputs.k0}")


def edgeworth_differences(t, inputs: EdgeworthInputs, marg: GaussianMarginals, *, bootstrap: bool, derivative: bool = False):
    """``M_s(t) - M_{Z,s}(t)`` for ``s = 1..k0`` under the chosen Edgeworth density.

    ``bootstrap=False`` uses the population density (third moments only);
    ``bootstrap=True`` the bootstrap density with the covariance deviation
    and the ``gamma``-weighted third moments.
    """
    s_max = min(inputs.k0, marg.d)
    sig = marg.sigmas
    c3 = (inputs.gamma if bootstrap else 1.0) / (6.0 * math.sqrt(inputs.n))
    if bootstrap and inputs.resid is not None:
        var = inputs.variances if inputs.variances is not None else sig**2
        sec, thi, dsec, dthi = sample_tensor_sums(t, sig, inputs.resid, s_max, derivative)
        pop, dpop = diagonal_tensor_sums(t, sig, var, 2, s_max, derivative)
        D = 0.5 * (sec - pop) - c3 * thi
        dD = 0.5 * (dsec - dpop) - c3 * dthi if derivative else None
    else:
        thi, dthi = diagonal_tensor_sums(t, sig, inputs.third_cumulants, 3, s_max, derivative)
        D = -c3 * thi
        dD = -c3 * dthi if derivative else None
        if bootstrap:
            sec, dsec = diagonal_tensor_sums(t, sig, inputs.var_devs, 2, s_max, derivative)
            D = D + 0.5 * sec
            if derivative:
                dD = dD + 0.5 * dsec
    out = np.zeros(inputs.k0)
    out[:s_max] = D
    if not derivative:
        return out, None
    dout = np.zeros(inputs.k0)
    dout[:s_max] = dD
    return out, dout


def _weights(k: int, k0: int) -> np.ndarray:
    """``(-1)^{s-k} C(s-1, k-1)`` for ``s = 1..k0`` (zero below ``k``)."""
    w = np.zeros(k0)
    for s in range(k, k0 + 1):
        w[s - 1] = (-1) ** (s - k) * math.comb(s - 1, k - 1)
    return w


def _q(t, k, inputs, marg, Sigma, bootstrap, derivative):
    _check_k(k, inputs)
    _check_diagonal(Sigma, marg)
    if marg.d != inputs.d:
        raise DomainError("marginals and inputs disagree on d")
    D, dD = edgeworth_differences(t, inputs, marg, bootstrap=bootstrap, derivative=derivative)
    w = _weights(k, inputs.k0)
    q = -float(w @ D)
    if derivative:
        return q, -float(w @ dD)
    return q


def q_correction_diag(t: float, k: int, inputs: EdgeworthInputs, marg: GaussianMarginals, Sigma=None, *, derivative=False):
    """Population correction ``Q_{n,k}(t)`` so that ``P(T_{n,[k]} <= t) ~ G_k(t) + Q_{n,k}(t)``."""
    return _q(t, k, inputs, marg, Sigma, False, derivative)


def q_hat_correction_diag(t: float, k: int, inputs: EdgeworthInputs, marg: GaussianMarginals, Sigma=None, *, derivative=False):
    """Bootstrap correction ``Qhat_{n,gamma,k}(t)``; with ``derivative=True`` returns ``(Q, Q')``."""
    return _q(t, k, inputs, marg, Sigma, True, derivative)


# ---------------------------------------------------------------------------
# Monte Carlo oracle for general covariance


class MnsEstimate(NamedTuple):
    value: float
    se: float
    correction: float
    correction_se: float
    subsets: int


def _density_ratio_terms(Z, P, inputs: EdgeworthInputs, I, bootstrap: bool):
    """``p_I(z) / phi_I(z) - 1`` evaluated at the rows of ``Z``."""
    Y = Z @ P
    c3 = (inputs.gamma if bootstrap else 1.0) / (6.0 * math.sqrt(inputs.n))
    Pd = np.diag(P)
    out = np.zeros(Z.shape[0])
    if bootstrap and inputs.resid is not None:
        b = inputs.resid[:, I]
        var = inputs.variances if inputs.variances is not None else None
        A = b.T @ b / b.shape[0]
        A -= np.diag(var[I] if var is not None else np.diag(np.linalg.inv(P)))
        out += 0.5 * (np.einsum("ma,ab,mb->m", Y, A, Y) - np.sum(A * P))
        xy = Y @ b.T  # (m, n)
        xPx = np.einsum("ia,ab,ib->i", b, P, b)
        out -= c3 * np.mean(-(xy**3) + 3.0 * xy * xPx[None, :], axis=1)
    else:
        kap = inputs.third_cumulants[I]
        out -= c3 * ((-(Y**3) + 3.0 * Y * Pd) @ kap)
        if bootstrap:
            v = inputs.var_devs[I]
            out += 0.5 * ((Y**2 - Pd) @ v)
    return out


def m_ns_mc_oracle(
    t: float,
    s: int,
    inputs: EdgeworthInputs,
    R,
    reps: int,
    rng: np.random.Generator,
    *,
    sigmas=None,
    bootstrap: bool = False,
    subset_budget: int = 64,
) -> MnsEstimate:
    """Importance-sampling estimate of ``M_{n,s}(t)`` for a general covariance.

    Each orthant integral ``int_{(t,inf)^s} p_{n,I}`` is estimated with
    ``reps`` draws from ``N(t 1, Sigma_II)`` reweighted to ``phi_I``.  Index
    sets are enumerated when there are at most ``subset_budget`` of them and
    otherwise sampled uniformly, the sum being rescaled by ``C(d, s)``
    over the sample size.  ``correction`` is the part ``M_{n,s} - M_{Z,s}``
    estimated from the same draws.
    """
    R = np.asarray(R, dtype=float)
    d = R.shape[0]
    if not 1 <= s <= min(d, 4):
        raise DomainError("oracle supports 1 <= s <= min(d, 4)")
    sig = np.ones(d) if sigmas is None else np.broadcast_to(np.asarray(sigmas, float), (d,))
    Sigma = R * np.outer(sig, sig)
    total = math.comb(d, s)
    if total <= subset_budget:
        import itertools

        subsets = [list(c) for c in itertools.combinations(range(d), s)]
        scale = 1.0
    else:
        subsets = [sorted(rng.choice(d, size=s, replace=False).tolist()) for _ in range(subset_budget)]
        scale = total / subset_budget
    vals, corr = [], []
    vvar, cvar = [], []
    for I in subsets:
        S = Sigma[np.ix_(I, I)]
        L = np.linalg.cholesky(S)
        P = np.linalg.inv(S)
        mu = np.full(s, float(t))
        Z = mu + rng.standard_normal((reps, s)) @ L.T
        # log phi_I(z) - log phi_I(z - mu)
        logw = -(Z @ P @ mu) + 0.5 * mu @ P @ mu
        w = np.exp(logw) * np.all(Z > t, axis=1)
        extra = _density_ratio_terms(Z, P, inputs, I, bootstrap)
        base = w
        full = w * (1.0 + extra)
        cor = w * extra
        vals.append(full.mean())
        corr.append(cor.mean())
        vvar.append(full.var(ddof=1) / reps)
        cvar.append(cor.var(ddof=1) / reps)
    vals, corr = np.array(vals), np.array(corr)
    if scale == 1.0:
        return MnsEstimate(
            float(vals.sum()), float(math.sqrt(sum(vvar))), float(corr.sum()), float(math.sqrt(sum(cvar))), len(subsets)
        )
    m = len(subsets)
    return MnsEstimate(
        float(total * vals.mean()),
        float(total * vals.std(ddof=1) / math.sqrt(m)),
        float(total * corr.mean()),
        float(total * corr.std(ddof=1) / math.sqrt(m)),
        m,
    )


# ---------------------------------------------------------------------------
# Cornish-Fisher predictor


@dataclass
class CFExpansion:
    c_gauss: float
    linear_term: float
    quadratic_term: float
    predicted: float
    q_hat: float
    q_hat_prime: float
    fk: float
    fk_prime: float


def cornish_fisher_predict(
    alpha: float,
    k: int,
    d: int,
    sigma: float,
    inputs: EdgeworthInputs,
    eps: float = 0.01,
) -> CFExpansion:
    """Predicted bootstrap critical value ``chat_{1-alpha,k}``.

    ``c^G - Qhat / f_k + f_k' Qhat^2 / (2 f_k^3) - Qhat' Qhat / f_k^2``, all
    evaluated at ``c^G = G_k^{-1}(1 - alpha)`` for independent
    ``N(0, sigma^2)`` coordinates.
    """
    if not eps < alpha < 1.0 - eps:
        raise WindowError(f"alpha={alpha} outside ({eps}, {1 - eps})")
    marg = GaussianMarginals.equal(d, sigma)
    c = gref.gk_quantile(1.0 - alpha, d, k, sigma)
    q, dq = q_hat_correction_diag(c, k, inputs, marg, derivative=True)
    f = gref.fk_independent(c, d, k, sigma)
    fp = gref.fk_prime_independent(c, d, k, sigma)
    linear = -q / f
    quad = fp / (2.0 * f**3) * q * q - dq / f**2 * q
    return CFExpansion(c, linear, quad, c + linear + quad, q, dq, f, fp)
