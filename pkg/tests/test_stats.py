import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from threearm.stats import (
    GaussianRegion,
    NoSignChangeError,
    RootBracket,
    bivariate_normal_cdf,
    equicoordinate_quantile,
    gaussian_region_prob,
    halfplane_prob,
    pooled_sd,
    solve_monotone_root,
    std_normal_cdf,
    std_normal_quantile,
)

mpmath.mp.dps = 30
Z975 = 1.959963984540054  # mpmath.sqrt(2) * erfinv(0.95)


def mp_bvn(h, k, r):
    """High-precision oracle: integrate phi(x) Phi((k - r x)/sqrt(1 - r^2)) up to h."""
    s = mpmath.sqrt(1 - mpmath.mpf(r) ** 2)
    f = lambda x: mpmath.npdf(x) * mpmath.ncdf((k - r * x) / s)
    pts = [p for p in (-40, -10, -5, -2, 0, 2, 5) if p < h] + [h]
    return float(mpmath.quad(f, pts))


# --- univariate -----------------------------------------------------------

def test_cdf_at_zero():
    assert std_normal_cdf(0.0) == 0.5


def test_cdf_against_mpmath():
    for x in (-7.5, -3.0, -1.0, 0.3, 1.959964, 4.2, 8.0):
        assert std_normal_cdf(x) == pytest.approx(float(mpmath.ncdf(x)), abs=1e-12)
    assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)


def test_cdf_saturates():
    assert std_normal_cdf(9.0) == 1.0
    assert std_normal_cdf(-9.0) == 0.0


@given(st.floats(-8, 8))
def test_cdf_reflection(x):
    assert std_normal_cdf(x) + std_normal_cdf(-x) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-6, 6))
def test_quantile_roundtrip(x):
    assert std_normal_quantile(std_normal_cdf(x)) == pytest.approx(x, abs=1e-8)


def test_quantile_values():
    assert std_normal_quantile(0.5) == 0.0
    assert std_normal_quantile(0.975) == pytest.approx(Z975, abs=1e-10)
    assert std_normal_quantile(0.025) == pytest.approx(-Z975, abs=1e-10)
    # oracle: root of the mpmath CDF
    oracle = float(mpmath.findroot(lambda x: mpmath.ncdf(x) - mpmath.mpf("0.975"), 2.0))
    assert std_normal_quantile(0.975) == pytest.approx(oracle, abs=1e-10)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, 1e-301])
def test_quantile_domain(p):
    with pytest.raises(ValueError):
        std_normal_quantile(p)


# --- bivariate ------------------------------------------------------------

def test_bvn_closed_forms():
    assert bivariate_normal_cdf(0, 0, 0.5) == pytest.approx(1 / 3, abs=1e-7)
    assert bivariate_normal_cdf(0, 0, 0.0) == pytest.approx(0.25, abs=1e-7)


@pytest.mark.parametrize("rho", np.linspace(-0.999, 0.999, 41))
def test_bvn_orthant_identity(rho):
    assert bivariate_normal_cdf(0, 0, rho) == pytest.approx(
        0.25 + math.asin(rho) / (2 * math.pi), abs=1e-7)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_bvn_degenerate_correlation(h, k):
    assert bivariate_normal_cdf(h, k, 1.0) == pytest.approx(std_normal_cdf(min(h, k)), abs=1e-7)
    assert bivariate_normal_cdf(h, k, -1.0) == pytest.approx(
        max(0.0, std_normal_cdf(h) - std_normal_cdf(-k)), abs=1e-7)


def test_bvn_against_mpmath_oracle():
    rng = np.random.default_rng(11)
    for _ in range(60):
        h, k = rng.uniform(-4, 4, 2)
        r = rng.uniform(-0.99, 0.99)
        assert bivariate_normal_cdf(h, k, r) == pytest.approx(mp_bvn(h, k, r), abs=1e-7)


def test_bvn_rejects_bad_rho():
    with pytest.raises(ValueError):
        bivariate_normal_cdf(0, 0, 1.01)


# --- polygons and boxes ---------------------------------------------------

def test_halfplane_routes_agree():
    rng = np.random.default_rng(5)
    for _ in range(300):
        k = rng.integers(1, 5)
        a = rng.normal(size=(k, 2))
        b = rng.normal(size=k) * rng.choice([0.2, 1.0, 3.0])
        assert halfplane_prob(a, b) == pytest.approx(halfplane_prob(a, b, "quadrature"), abs=1e-9)


def test_halfplane_single_and_empty():
    assert halfplane_prob([[1.0, 0.0]], [1.0]) == pytest.approx(1 - std_normal_cdf(1.0), abs=1e-14)
    assert halfplane_prob([[1.0, 0.0], [-1.0, 0.0]], [1.0, -0.5]) == 0.0


def test_region_dim1():
    reg = GaussianRegion((-math.inf,), (0.0,), (0.0,), ((1.0,),))
    assert gaussian_region_prob(reg) == pytest.approx(0.5, abs=1e-12)


def test_region_dim2_matches_bvn():
    reg = GaussianRegion((-math.inf, -math.inf), (0.0, 0.0), (0.0, 0.0), ((1, 0.5), (0.5, 1)))
    assert gaussian_region_prob(reg) == pytest.approx(1 / 3, abs=1e-7)


def _difference_law(n, sigma, means):
    """(D_EP, D_ER, D_RP) built from independent arm means; rank 2."""
    n_e, n_r, n_p = n
    A = np.array([[1, 0, -1], [1, -1, 0], [0, 1, -1]], dtype=float)
    V = np.diag([sigma ** 2 / n_e, sigma ** 2 / n_r, sigma ** 2 / n_p])
    return A, A @ np.asarray(means, float), A @ V @ A.T


def test_region_singular_scenario1_against_mc():
    # Success-ER event of the baseline procedure in Scenario 1
    n, sigma = (356, 348, 145), 2.0
    A, mu, cov = _difference_law(n, sigma, (1.0, 1.0, 0.0))
    z = Z975
    se = np.sqrt(np.diag(cov))
    lower = (z * se[0], -0.5 + z * se[1], z * se[2])
    reg = GaussianRegion(lower, (math.inf,) * 3, tuple(mu), tuple(map(tuple, cov)))
    p = gaussian_region_prob(reg)
    rng = np.random.default_rng(2024)
    hits, total = 0, 0
    for _ in range(10):
        x = rng.standard_normal((1_000_000, 3)) * (sigma / np.sqrt(n)) + (1.0, 1.0, 0.0)
        y = x @ A.T
        hits += int(np.all(y >= lower, axis=1).sum())
        total += x.shape[0]
    mc = hits / total
    assert abs(p - mc) <= 3 * math.sqrt(mc * (1 - mc) / total)


def test_region_random_boxes_against_mc():
    rng = np.random.default_rng(99)
    draws = 1_000_000
    for i in range(100):
        d = 1 + i % 3
        rank = d if (i // 3) % 2 == 0 or d == 1 else d - 1
        B = rng.normal(size=(d, rank))
        cov = B @ B.T
        mu = rng.normal(size=d)
        sd = np.sqrt(np.diag(cov))
        lo = mu + sd * rng.uniform(-2.0, 0.5, d)
        hi = lo + sd * rng.uniform(0.5, 3.0, d)
        lo[rng.random(d) < 0.25] = -math.inf
        hi[rng.random(d) < 0.25] = math.inf
        reg = GaussianRegion(tuple(lo), tuple(hi), tuple(mu), tuple(map(tuple, cov)))
        p = gaussian_region_prob(reg)
        y = mu + rng.standard_normal((draws, rank)) @ B.T
        mc = np.mean(np.all((y >= lo) & (y <= hi), axis=1))
        se = math.sqrt(max(mc * (1 - mc), 1e-12) / draws)
        assert abs(p - mc) <= 3 * se + 1e-12, (i, p, mc)


def test_region_validation():
    with pytest.raises(ValueError):
        GaussianRegion((0,) * 4, (1,) * 4, (0,) * 4, tuple(map(tuple, np.eye(4))))
    with pytest.raises(ValueError):
        GaussianRegion((0, 0), (1, 1), (0, 0), ((1, 2), (2, 1)))
    with pytest.raises(ValueError):
        GaussianRegion((1,), (0,), (0,), ((1,),))


# --- equicoordinate quantile ----------------------------------------------

def test_equicoordinate_limits():
    assert equicoordinate_quantile(0.025, 1 - 1e-12) == pytest.approx(Z975, abs=1e-4)
    assert equicoordinate_quantile(0.025, 0.0) == pytest.approx(
        std_normal_quantile(math.sqrt(0.975)), abs=1e-3)
    assert std_normal_quantile(math.sqrt(0.975)) == pytest.approx(2.2390, abs=1e-3)


def test_equicoordinate_residual_against_oracle():
    rho = math.sqrt((145 / 356) * (348 / 356) / ((1 + 145 / 356) * (1 + 348 / 356)))
    d = equicoordinate_quantile(0.025, rho)
    assert abs(mp_bvn(d, d, rho) - 0.975) <= 1e-6
    # frozen from the mpmath root: d = 2.22350...
    assert d == pytest.approx(2.22350, abs=1e-4)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.001, 0.2), st.floats(0.0, 0.95), st.floats(0.0, 0.95))
def test_equicoordinate_monotone(alpha, r1, r2):
    lo, hi = sorted((r1, r2))
    z = std_normal_quantile(1 - alpha)
    d_lo = equicoordinate_quantile(alpha, lo)
    d_hi = equicoordinate_quantile(alpha, hi)
    assert d_hi <= d_lo + 1e-9
    assert d_hi >= z - 1e-12


@pytest.mark.parametrize("alpha,rho", [(0.0, 0.3), (0.5, 0.3), (0.025, 1.0), (0.025, -0.1)])
def test_equicoordinate_domain(alpha, rho):
    with pytest.raises(ValueError):
        equicoordinate_quantile(alpha, rho)


# --- root solver and pooled sd --------------------------------------------

def test_root_linear():
    assert solve_monotone_root(lambda x: x - 1, RootBracket(0, 2)) == pytest.approx(1, abs=1e-9)


def test_root_quantile():
    r = solve_monotone_root(lambda x: std_normal_cdf(x) - 0.975, RootBracket(0, 5, 1e-10))
    assert r == pytest.approx(Z975, abs=1e-9)


def test_root_no_sign_change():
    with pytest.raises(NoSignChangeError):
        solve_monotone_root(lambda x: x + 5, RootBracket(0, 2))


def test_bracket_validation():
    with pytest.raises(ValueError):
        RootBracket(1, 0)
    with pytest.raises(ValueError):
        RootBracket(0, 1, 0.0)


def test_pooled_sd():
    assert pooled_sd(3.0, 10, 3.0, 10) == pytest.approx(3.0)
    assert pooled_sd(6.1, 147, 5.8, 145) == pytest.approx(5.95, abs=0.01)
    assert pooled_sd(6.1, 147, 6.9, 148) == pytest.approx(6.51, abs=0.01)
    with pytest.raises(ValueError):
        pooled_sd(0.0, 10, 1.0, 10)
    with pytest.raises(ValueError):
        pooled_sd(1.0, 1, 1.0, 10)
