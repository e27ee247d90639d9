import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from kthboot import gaussian_reference as gref
from kthboot import mixing as mx
from kthboot.errors import DegenerateLayout, DomainError, LengthError
from kthboot.rng import stream
from kthboot.sampling import sample_ar1_path


def test_dependence_params():
    assert mx.dependence_params(1.3, 1.3) == (0.0, 1.0)
    th, b = mx.dependence_params(1 / math.sqrt(2), 1.0)
    assert th == pytest.approx(0.5) and b == pytest.approx(1 / 3)
    grid = np.linspace(0.05, 1.0, 40)
    betas = [mx.dependence_params(s, 1.0)[1] for s in grid[::-1]]
    assert np.all(np.diff(betas) < 0)
    with pytest.raises(DomainError):
        mx.dependence_params(1.1, 1.0)
    with pytest.raises(DomainError):
        mx.dependence_params(0.0, 1.0)


@pytest.mark.parametrize(
    "kw",
    [dict(C_alpha=0.5), dict(a_alpha=0.0), dict(d=0), dict(k0=0), dict(eps=0.5), dict(sigma_star=2.0)],
)
def test_params_validation(kw):
    base = dict(C_alpha=1.0, a_alpha=1.0, sigma_star=1.0, sigma_bar=1.0, d=100, n=100, k0=3)
    base.update(kw)
    with pytest.raises(DomainError):
        mx.MixingParams(**base)


def test_layout_examples():
    p = mx.MixingParams(1.0, 1.0, 1.0, 1.0, 10000, 100, 1)
    assert mx.block_lengths(p)[0] == 10
    p = mx.MixingParams(1.0, 0.5, 1.0, 1.0, 1000, 100, 5)
    m, ell = mx.block_lengths(p)
    assert ell == math.ceil((56 * math.log(2000) + 8 * math.log(100)) / 0.5) == 925
    lay = mx.block_layout(p)
    assert (lay.m_d, lay.ell_d, lay.q_d, lay.s_d) == (6, 925, 1, 69)


def _exact_ceil_root(d, beta):
    # smallest integer m with m^(4/beta) >= d, for beta = 1/j
    j = round(1 / beta)
    m = 1
    while m ** (4 * j) < d:
        m += 1
    return m


@pytest.mark.parametrize("beta_inv", [1, 2, 3])
@pytest.mark.parametrize("d", [1, 15, 16, 17, 81, 255, 256, 257, 4095, 4096, 10**4, 10**6, 3**12, 2**40, 10**16])
def test_block_length_m_exact(d, beta_inv):
    # sigma_star chosen so that beta_star = 1 / beta_inv exactly in rational arithmetic
    theta = (beta_inv - 1) / (beta_inv + 1)
    p = mx.MixingParams(1.0, 1.0, math.sqrt(1 - theta), 1.0, d, 10, 1)
    assert p.beta_star == pytest.approx(1 / beta_inv, abs=1e-15)
    assert mx.block_lengths(p)[0] == _exact_ceil_root(d, 1 / beta_inv)


def _check_partition(lay):
    covered = []
    for r, (I, J) in enumerate(zip(lay.main_blocks, lay.gaps)):
        assert len(I) == lay.m_d and len(J) == lay.ell_d
        assert I.stop == J.start
        if r:
            assert I.start == lay.gaps[r - 1].stop
        covered += list(I) + list(J)
    covered += list(lay.remainder)
    assert covered == list(range(lay.d))
    assert lay.q_d * (lay.m_d + lay.ell_d) + lay.s_d == lay.d
    assert 0 <= lay.s_d < lay.m_d + lay.ell_d


@settings(max_examples=200, deadline=None)
@given(
    d=st.integers(1, 20000),
    n=st.integers(2, 10**6),
    k0=st.integers(1, 20),
    a=st.floats(0.05, 50.0),
    s=st.floats(0.1, 1.0),
)
def test_layout_arithmetic_fuzz(d, n, k0, a, s):
    p = mx.MixingParams(1.0, a, s, 1.0, d, n, k0)
    lay = mx.block_layout(p)
    # exact rational check of the gap length formula away from rounding ties
    num = 8 * (k0 + 2) * math.log(2 * d) + 8 * math.log(n)
    frac = Fraction(num) / Fraction(a)
    if abs(float(frac) - round(float(frac))) > 1e-9:
        assert lay.ell_d == math.ceil(frac)
    assert lay.m_d >= 1
    assert lay.q_d == d // (lay.m_d + lay.ell_d)
    assert lay.degenerate == (lay.q_d == 0)
    _check_partition(lay)


def test_layout_huge_d_is_arithmetic():
    p = mx.MixingParams(1.0, 1.0, 1.0, 1.0, 10**30, 10**6, 50)
    lay = mx.block_layout(p)
    assert lay.q_d * lay.period + lay.s_d == 10**30
    assert lay.main_block(lay.q_d - 1).stop <= 10**30


def test_block_index_errors():
    lay = mx.BlockLayout(20, 3, 2, 4, 0)
    with pytest.raises(IndexError):
        lay.main_block(4)
    with pytest.raises(IndexError):
        lay.gap(-1)


# ---------------------------------------------------------------- remainder


def test_remainder_components_sum():
    p = mx.MixingParams(1.0, 1.0, 1.0, 1.0, 10**8, 100, 5, k=2)
    rb = mx.remainder_rd(p)
    parts = (rb.eta1, rb.inv_qd, rb.mixing_term, rb.poisson_tail)
    assert all(x >= 0 for x in parts)
    assert rb.r_d == sum(parts)
    lay = mx.block_layout(p)
    d = 10**8
    assert rb.eta1 == pytest.approx(lay.ell_d / lay.m_d + lay.period / d + d**-0.75 / math.sqrt(math.log(d)))
    assert rb.inv_qd == 1 / lay.q_d
    lam = gref.solve_lambda_eps(2, 0.1)
    assert rb.poisson_tail == pytest.approx((3 * lam) ** 6 / math.factorial(6))


def test_remainder_log_space_mixing_term():
    p = mx.MixingParams(1.0, 0.1, 1.0, 1.0, 400, 200, 10)
    rb = mx.remainder_rd(p, allow_degenerate=True)
    ell = mx.block_layout(p).ell_d
    expected = (11 * math.log(400) - 0.1 * ell) / math.log(10)
    assert rb.log10_mixing_term == pytest.approx(expected, rel=1e-12)
    assert rb.log10_mixing_term < -50
    assert math.isfinite(rb.log10_mixing_term) and math.isfinite(rb.log10_poisson_tail)


def test_remainder_degenerate():
    p = mx.MixingParams(1.0, 1.0, 1.0, 1.0, 100, 200, 10)
    assert mx.block_layout(p).degenerate
    with pytest.raises(DegenerateLayout):
        mx.remainder_rd(p)
    rb = mx.remainder_rd(p, allow_degenerate=True)
    assert rb.inv_qd == math.inf and rb.r_d == math.inf
    assert math.isfinite(rb.eta1) and math.isfinite(rb.poisson_tail)


def test_rate_scan_bounded():
    rows = mx.rate_scan([10**3, 10**4, 10**5], 5.0)
    vals = [r[3] for r in rows]
    assert [r[1] for r in rows] == [10**15, 10**20, 10**25]
    assert all(math.isfinite(v) for v in vals)
    assert vals[0] >= vals[1] >= vals[2]


def test_rd_nonincreasing_along_powers_of_two():
    rs = []
    for j in range(1, 120):
        p = mx.MixingParams(1.0, 1.0, 1.0, 1.0, 2**j, 100, 5, k=2)
        rs.append(mx.remainder_rd(p, allow_degenerate=True).r_d)
    rs = np.array(rs)
    assert np.isinf(rs[0])
    rs = rs[np.isfinite(rs).argmax():]
    assert np.all(np.isfinite(rs))
    increases = np.flatnonzero(np.diff(rs) > 0)
    threshold = increases[-1] + 1 if increases.size else 0
    assert threshold < 90
    assert np.all(np.diff(rs[threshold:]) <= 0)


# ---------------------------------------------------------------- cluster tails and the bad event


def test_cluster_tail_examples():
    b, mills = mx.cluster_tail_bound(2, 3.0, 1.0, 0.5)
    assert b == pytest.approx(stats.norm.sf(math.sqrt(2 / 1.5) * 3), rel=1e-12)
    assert b == pytest.approx(2.66e-4, rel=5e-3)
    assert mills >= b
    for t in np.linspace(0.05, 6, 40):
        assert mx.cluster_tail_bound(2, t, 1.0, 0.0)[0] >= stats.norm.sf(t) ** 2


@pytest.mark.parametrize("bad", [dict(m=1), dict(t=0.0), dict(sigma=-1.0), dict(theta_star=1.0)])
def test_cluster_tail_domain(bad):
    kw = dict(m=2, t=1.0, sigma=1.0, theta_star=0.2)
    kw.update(bad)
    with pytest.raises(DomainError):
        mx.cluster_tail_bound(**kw)


@pytest.mark.slow
def test_cluster_tail_mc_ar1_pairs():
    rho, total, chunk = 0.5, 10**7, 10**6
    ts = np.array([1.5, 2.0, 2.5])
    hits = np.zeros(3)
    rng = stream(60)
    for _ in range(total // chunk):
        z0 = rng.standard_normal(chunk)
        z1 = rho * z0 + math.sqrt(1 - rho**2) * rng.standard_normal(chunk)
        m = np.minimum(z0, z1)
        hits += (m[:, None] > ts).sum(axis=0)
    for t, h in zip(ts, hits / total):
        assert h <= mx.cluster_tail_bound(2, t, 1.0, 0.5)[0]


def test_block_compare_single_exceedances():
    lay = mx.BlockLayout(20, 3, 2, 4, 0)
    z = np.zeros(20)
    z[6] = 5.0  # second main block
    assert mx.block_exceedance_compare(z, lay, 1.0) == (1, 1, False, False)
    z = np.zeros(20)
    z[3] = 5.0  # first gap
    N, S, mis, ev = mx.block_exceedance_compare(z, lay, 1.0)
    assert (N, S, mis) == (1, 0, True) and ev
    z[0] = z[1] = 5.0
    N, S, mis, _ = mx.block_exceedance_compare(z, lay, 1.0, k=2)
    assert (N, S, mis) == (3, 1, True)


def test_block_compare_length_error():
    lay = mx.BlockLayout(20, 3, 2, 4, 0)
    with pytest.raises(LengthError):
        mx.block_exceedance_compare(np.zeros(19), lay, 1.0)


def test_block_compare_s_below_n(rng):
    lay = mx.BlockLayout(103, 4, 3, 14, 5)
    z = sample_ar1_path(103, 0.6, 1.0, rng, size=2000)
    N, S, mis, ev = mx.block_exceedance_compare(z, lay, 1.0)
    assert np.all(S <= N)
    assert np.array_equal(mis, N != S)
    # the 2-D path agrees row by row with the 1-D path
    for i in range(0, 2000, 397):
        one = mx.block_exceedance_compare(z[i], lay, 1.0)
        assert (one.N_d, one.S_d) == (N[i], S[i])


def _bad_event_rate(lay, rho, paths, seed):
    t = float(stats.norm.isf(2.0 / lay.d))  # lambda(t) = 2
    z = sample_ar1_path(lay.d, rho, 1.0, stream(seed), size=paths)
    res = mx.block_exceedance_compare(z, lay, t)
    p = float(res.mismatch.mean())
    return p, math.sqrt(p * (1 - p) / paths), mx.bad_event_bound(lay, t, 1.0, abs(rho))


def test_bad_event_bound_on_ar1_paths():
    rho = 0.3
    p = mx.MixingParams.for_ar1(rho, 1000, 10, 1)
    lay = mx.block_layout(p)
    assert not lay.degenerate
    rate, se, bound = _bad_event_rate(lay, rho, 10**4, 61)
    assert rate <= bound
    # a short-gap layout where the bound is informative
    lay = mx.BlockLayout(1000, 3, 2, 200, 0)
    rate, se, bound = _bad_event_rate(lay, rho, 10**4, 62)
    assert bound < 1
    assert rate <= bound


# ---------------------------------------------------------------- Poisson window and correlation decay


def test_poisson_window_independent_matches_exact_gap():
    rep = mx.poisson_window_check(0.0, 1.0, 400, 2, 0.1, 20000, stream(63))
    assert rep.exact_gap is not None
    assert np.all(rep.exact_gap < 0.01)
    assert np.all(np.abs(rep.gap - rep.exact_gap) <= 4 * rep.gk_se + 1e-12)
    lam_hat = 400 * stats.norm.sf(rep.t)
    np.testing.assert_allclose(rep.lam, lam_hat, rtol=1e-12)
    np.testing.assert_allclose(rep.poisson, gref.hk(2, lam_hat), atol=1e-12)
    assert rep.rd_bound == math.inf or rep.rd_bound > 0


def test_poisson_window_grid_spans_window():
    rep = mx.poisson_window_check(0.3, 1.0, 200, 2, 0.1, 200, stream(64))
    assert rep.poisson[0] == pytest.approx(0.95, abs=1e-9)
    assert rep.poisson[-1] == pytest.approx(0.05, abs=1e-9)
    assert rep.exact_gap is None


@pytest.mark.slow
def test_poisson_window_gap_shrinks_with_d():
    gaps = [mx.poisson_window_check(0.3, 1.0, d, 2, 0.1, 40000, stream(65, d)).max_gap for d in (100, 400, 1600)]
    assert gaps[0] > gaps[2]
    assert gaps[0] >= gaps[1] - 0.005 and gaps[1] >= gaps[2] - 0.005


def test_corr_decay_bound():
    for rho in (0.1, 0.3, 0.5, 0.9):
        a = -math.log(rho)
        h = np.arange(0, 60)
        assert np.all(rho**h <= mx.corr_decay_bound(h, 1.0, a))
        assert np.all(rho**h <= mx.corr_decay_bound(h, 1 / (2 * math.pi), a) * (1 + 1e-12))
    p = mx.MixingParams.for_ar1(0.3, 100, 10, 2)
    assert p.a_alpha == pytest.approx(-math.log(0.3)) and p.theta_star == pytest.approx(0.3)


def test_for_ar1_independent_has_no_gaps():
    p = mx.MixingParams.for_ar1(0.0, 100, 10, 2)
    lay = mx.block_layout(p)
    assert lay.ell_d == 0 and lay.q_d == 100 // lay.m_d
    assert mx.remainder_rd(p).mixing_term == 0
