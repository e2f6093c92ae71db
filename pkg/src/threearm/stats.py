"""Gaussian primitives shared by the interval, design and simulation code.

Everything here is a pure function of its arguments. The bivariate normal
CDF follows the Drezner/Genz Gauss-Legendre scheme; box probabilities in up
to three dimensions are reduced to one-dimensional quadratures with
closed-form inner terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "GaussianRegion",
    "RootBracket",
    "NoSignChangeError",
    "RootNotConvergedError",
    "std_normal_cdf",
    "std_normal_sf",
    "std_normal_logsf",
    "std_normal_quantile",
    "bivariate_normal_cdf",
    "bivariate_normal_rect",
    "gaussian_region_prob",
    "halfplane_prob",
    "equicoordinate_quantile",
    "solve_monotone_root",
    "pooled_sd",
]

_SATURATE = 8.5
_P_MIN = 1e-300
_P_MAX = 1.0 - 1e-16
_PSD_TOL = 1e-10


class NoSignChangeError(ValueError):
    """The bracket handed to the root solver does not contain a sign change."""


class RootNotConvergedError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# univariate normal
# --------------------------------------------------------------------------

def std_normal_cdf(x: float) -> float:
    """Standard normal CDF, saturating to exact 0/1 beyond |x| > 8.5."""
    if math.isnan(x):
        raise ValueError("x must not be NaN")
    if x > _SATURATE:
        return 1.0
    if x < -_SATURATE:
        return 0.0
    return float(special.ndtr(x))


def std_normal_sf(x: float) -> float:
    """Upper tail 1 - Phi(x), without saturation or cancellation."""
    return float(special.ndtr(-x))


def std_normal_logsf(x):
    """log(1 - Phi(x)); accurate far into the upper tail. Accepts arrays."""
    return special.log_ndtr(-np.asarray(x, dtype=float))


def std_normal_quantile(p: float) -> float:
    """Inverse of the standard normal CDF.

    Raises ValueError outside (1e-300, 1 - 1e-16), which includes the
    whole complement of the open unit interval.
    """
    if not (_P_MIN < p < _P_MAX):
        raise ValueError(f"quantile requires p in (1e-300, 1-1e-16), got {p!r}")
    return float(special.ndtri(p))


# --------------------------------------------------------------------------
# bivariate normal (Drezner & Wesolowsky / Genz)
# --------------------------------------------------------------------------

_GL = {n: np.polynomial.legendre.leggauss(n) for n in (6, 12, 20)}


def _bvn_upper(h: float, k: float, r: float) -> float:
    """P(Z1 > h, Z2 > k) for a standard bivariate normal with correlation r."""
    ar = abs(r)
    if ar < 0.3:
        x, w = _GL[6]
    elif ar < 0.75:
        x, w = _GL[12]
    else:
        x, w = _GL[20]

    hk = h * k
    if ar < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        sn = np.sin(asr * (1.0 + x) / 2.0)
        bvn = float(np.sum(w * np.exp((sn * hk - hs) / (1.0 - sn * sn))))
        return bvn * asr / (4.0 * math.pi) + special.ndtr(-h) * special.ndtr(-k)

    if r < 0:
        k = -k
        hk = -hk
    bvn = 0.0
    if ar < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        bvn = a * math.exp(-(bs / as_ + hk) / 2.0) * (
            1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
        )
        if hk > -160.0:
            b = math.sqrt(bs)
            bvn -= (
                math.exp(-hk / 2.0) * math.sqrt(2.0 * math.pi) * special.ndtr(-b / a)
                * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0)
            )
        a /= 2.0
        xs = (a * (1.0 + x)) ** 2
        rs = np.sqrt(1.0 - xs)
        terms = np.exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs - np.exp(
            -(bs / xs + hk) / 2.0
        ) * (1.0 + c * xs * (1.0 + d * xs))
        bvn += a * float(np.sum(w * terms))
        bvn = -bvn / (2.0 * math.pi)

    if r > 0:
        bvn += special.ndtr(-max(h, k))
    else:
        bvn = -bvn
        if k > h:
            if h < 0:
                bvn += special.ndtr(k) - special.ndtr(h)
            else:
                bvn += special.ndtr(-h) - special.ndtr(-k)
    return bvn


def bivariate_normal_cdf(h: float, k: float, rho: float) -> float:
    """P(Z1 <= h, Z2 <= k) for standard normals with correlation ``rho``."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError(f"correlation must lie in [-1, 1], got {rho!r}")
    if h == -math.inf or k == -math.inf:
        return 0.0
    if h == math.inf:
        return float(special.ndtr(k))
    if k == math.inf:
        return float(special.ndtr(h))
    p = _bvn_upper(-h, -k, rho)
    return min(1.0, max(0.0, float(p)))


def bivariate_normal_rect(lo, hi, rho: float) -> float:
    """P(lo <= Z <= hi) for a standard bivariate normal, by inclusion-exclusion."""
    (a1, a2), (b1, b2) = lo, hi
    if a1 >= b1 or a2 >= b2:
        return 0.0
    p = (
        bivariate_normal_cdf(b1, b2, rho)
        - bivariate_normal_cdf(a1, b2, rho)
        - bivariate_normal_cdf(b1, a2, rho)
        + bivariate_normal_cdf(a1, a2, rho)
    )
    return min(1.0, max(0.0, p))


# --------------------------------------------------------------------------
# box probabilities in dimension <= 3
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianRegion:
    """Axis-aligned box ``lower <= Y <= upper`` with Y ~ N(mean, covariance).

    The covariance may be singular (rank >= 1).
    """

    lower: tuple
    upper: tuple
    mean: tuple
    covariance: tuple

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        mu = np.asarray(self.mean, dtype=float)
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        d = lo.size
        if d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
        if hi.size != d or mu.size != d or cov.shape != (d, d):
            raise ValueError("lower, upper, mean and covariance sizes disagree")
        if np.any(lo > hi):
            raise ValueError("lower must not exceed upper")
        if not np.allclose(cov, cov.T, atol=1e-12, rtol=0.0):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -_PSD_TOL:
            raise ValueError("covariance is not positive semi-definite")
        if np.all(np.abs(cov) == 0):
            raise ValueError("covariance must have rank >= 1")

    @property
    def dimension(self) -> int:
        return len(self.lower)


_GL16 = np.polynomial.legendre.leggauss(16)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _ndtr_diff(lo, hi):
    """Phi(hi) - Phi(lo) for lo <= hi, using the tail that avoids cancellation."""
    upper = lo > 0
    return np.where(upper, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))


def _best_rotation(a: np.ndarray) -> np.ndarray:
    # integrate along the direction whose angle to every boundary normal is largest
    ang = np.arctan2(a[:, 1], a[:, 0])
    cand = np.linspace(0.0, np.pi, 37)[:-1]
    score = np.min(np.abs(np.sin(ang[None, :] - cand[:, None])), axis=1)
    t = cand[int(np.argmax(score))]
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]])


def _clip(poly: list, n1: float, n2: float, c: float) -> list:
    """Sutherland-Hodgman step: keep the part of ``poly`` with n . z >= c."""
    out = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        fp = n1 * p[0] + n2 * p[1] - c
        fq = n1 * q[0] + n2 * q[1] - c
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            t = fp / (fp - fq)
            out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
    return out


_BOX = 40.0


def _polygon_prob_owen(a: np.ndarray, b: np.ndarray) -> float:
    poly = [(-_BOX, -_BOX), (_BOX, -_BOX), (_BOX, _BOX), (-_BOX, _BOX)]
    for (n1, n2), c in zip(a, b):
        poly = _clip(poly, n1, n2, c)
        if len(poly) < 3:
            return 0.0
    v = np.array(poly)
    p1, p2 = v, np.roll(v, -1, axis=0)
    cross = p1[:, 0] * p2[:, 1] - p1[:, 1] * p2[:, 0]
    d = p2 - p1
    length = np.hypot(d[:, 0], d[:, 1])
    keep = (np.abs(cross) > 1e-15) & (length > 1e-15)
    if not keep.any():
        return 0.0
    p1, d, length, cross = p1[keep], d[keep], length[keep], cross[keep]
    u = d / length[:, None]
    h = np.abs(cross) / length  # distance from the origin to the edge's line
    s1 = np.sum(u * p1, axis=1)
    s2 = s1 + length

    def right_triangle(s):
        # content of the right triangle (O, foot, foot + s u), signed by s
        r = np.abs(s) / h
        return np.sign(s) * (np.arctan(r) / (2.0 * math.pi) - special.owens_t(h, r))

    val = float(np.sum(np.sign(cross) * (right_triangle(s2) - right_triangle(s1))))
    return min(1.0, max(0.0, val))


def halfplane_prob(a: np.ndarray, b: np.ndarray, method: str = "owen") -> float:
    """P(a @ Z >= b for every row) with Z ~ N(0, I_2).

    The region is a convex, possibly unbounded polygon. The default
    ``"owen"`` route clips it to the box [-40, 40]^2 and sums the signed
    contents of the triangles spanned by the origin and each edge, each
    split into two right triangles whose content is closed-form in Owen's
    T function. ``"quadrature"`` integrates numerically instead.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if method == "owen":
        norms = np.hypot(a[:, 0], a[:, 1])
        trivial = norms <= 1e-300
        if np.any(trivial & (b > 0)):
            return 0.0
        a, b, norms = a[~trivial], b[~trivial], norms[~trivial]
        if a.size == 0:
            return 1.0
        return _polygon_prob_owen(a / norms[:, None], b / norms)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    return _halfplane_prob_quadrature(a, b)


def _halfplane_prob_quadrature(a: np.ndarray, b: np.ndarray) -> float:
    """Quadrature route for :func:`halfplane_prob`.

    The region is a convex, possibly unbounded polygon. After a rotation
    that keeps every edge well away from vertical, the probability is the
    integral over z1 of phi(z1) times a closed-form normal interval
    probability in z2; the z1 integral uses composite 16-point
    Gauss-Legendre panels of width <= 0.5 split at every edge crossing.
    """
    norms = np.hypot(a[:, 0], a[:, 1])
    trivial = norms <= 1e-300
    if np.any(trivial & (b > 0)):
        return 0.0
    a, b, norms = a[~trivial], b[~trivial], norms[~trivial]
    if a.size == 0:
        return 1.0
    a = a / norms[:, None]
    b = b / norms
    if len(a) == 1:
        return float(special.ndtr(-b[0]))
    # a z >= b with z = R y  <=>  (a R) y >= b
    a = a @ _best_rotation(a)
    z1_lo, z1_hi = -9.0, 9.0
    lo_s, lo_t, hi_s, hi_t = [], [], [], []
    for (a1, a2), bi in zip(a, b):
        if abs(a2) < 1e-12:
            if a1 > 0:
                z1_lo = max(z1_lo, bi / a1)
            else:
                z1_hi = min(z1_hi, bi / a1)
        elif a2 > 0:
            lo_s.append(-a1 / a2)
            lo_t.append(bi / a2)
        else:
            hi_s.append(-a1 / a2)
            hi_t.append(bi / a2)
    if z1_lo >= z1_hi:
        return 0.0
    slopes = np.array(lo_s + hi_s)
    icepts = np.array(lo_t + hi_t)
    edges = [z1_lo, z1_hi]
    for i in range(len(slopes)):
        for j in range(i + 1, len(slopes)):
            ds = slopes[i] - slopes[j]
            if abs(ds) > 1e-14:
                zc = (icepts[j] - icepts[i]) / ds
                if z1_lo < zc < z1_hi:
                    edges.append(zc)
    edges = np.unique(edges)
    # subdivide into panels no wider than 0.5
    pieces = []
    for u, v in zip(edges[:-1], edges[1:]):
        k = max(1, int(math.ceil((v - u) / 0.5)))
        pieces.append(np.linspace(u, v, k + 1)[:-1])
    left = np.concatenate(pieces)
    right = np.append(left[1:], edges[-1])
    x, w = _GL16
    half = 0.5 * (right - left)
    z1 = (0.5 * (left + right))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    z1 = z1.ravel()
    weights = weights.ravel()
    if lo_s:
        low = np.max(np.outer(z1, lo_s) + np.array(lo_t), axis=1)
    else:
        low = np.full_like(z1, -np.inf)
    if hi_s:
        high = np.min(np.outer(z1, hi_s) + np.array(hi_t), axis=1)
    else:
        high = np.full_like(z1, np.inf)
    inner = np.where(low < high, _ndtr_diff(low, np.maximum(low, high)), 0.0)
    val = float(np.sum(weights * np.exp(-0.5 * z1 * z1) / _SQRT2PI * inner))
    return min(1.0, max(0.0, val))


def _factor(cov: np.ndarray) -> np.ndarray:
    """Return B with B @ B.T == cov, dropping null directions."""
    vals, vecs = np.linalg.eigh(cov)
    keep = vals > 1e-12 * max(vals.max(), 1e-300)
    return vecs[:, keep] * np.sqrt(vals[keep])


def gaussian_region_prob(region: GaussianRegion) -> float:
    """Probability of an axis-aligned box under a possibly singular Gaussian.

    Full-rank problems use the bivariate CDF (dimension 2) or an outer
    quadrature over the first Cholesky coordinate with a bivariate inner
    rectangle (dimension 3). Rank-deficient problems are rewritten as a
    polygon in the factor space and passed to :func:`halfplane_prob`.
    """
    lo = np.asarray(region.lower, dtype=float)
    hi = np.asarray(region.upper, dtype=float)
    mu = np.asarray(region.mean, dtype=float)
    cov = np.atleast_2d(np.asarray(region.covariance, dtype=float))
    d = lo.size
    B = _factor(cov)
    rank = B.shape[1]

    if rank == 1:
        # Y = mu + B z, z scalar
        z_lo, z_hi = -math.inf, math.inf
        for i in range(d):
            bi = B[i, 0]
            if abs(bi) < 1e-300:
                if not (lo[i] <= mu[i] <= hi[i]):
                    return 0.0
                continue
            t1, t2 = (lo[i] - mu[i]) / bi, (hi[i] - mu[i]) / bi
            if bi < 0:
                t1, t2 = t2, t1
            z_lo, z_hi = max(z_lo, t1), min(z_hi, t2)
        if z_lo >= z_hi:
            return 0.0
        return float(special.ndtr(z_hi) - special.ndtr(z_lo))

    if rank == 2 and d == 3:
        rows, rhs = [], []
        for i in range(d):
            if np.isfinite(lo[i]):
                rows.append(B[i])
                rhs.append(lo[i] - mu[i])
            if np.isfinite(hi[i]):
                rows.append(-B[i])
                rhs.append(mu[i] - hi[i])
        if not rows:
            return 1.0
        return halfplane_prob(np.array(rows), np.array(rhs))

    sd = np.sqrt(np.diag(cov))
    zlo = (lo - mu) / sd
    zhi = (hi - mu) / sd
    if d == 2:
        rho = float(np.clip(cov[0, 1] / (sd[0] * sd[1]), -1.0, 1.0))
        return bivariate_normal_rect(zlo, zhi, rho)

    # d == 3, full rank: condition on the first coordinate
    corr = cov / np.outer(sd, sd)
    r12, r13, r23 = corr[0, 1], corr[0, 2], corr[1, 2]
    s2 = math.sqrt(max(1.0 - r12 * r12, 0.0))
    s3 = math.sqrt(max(1.0 - r13 * r13, 0.0))
    rho_c = float(np.clip((r23 - r12 * r13) / (s2 * s3), -1.0, 1.0))

    def inner(t):
        lo2 = (zlo[1] - r12 * t) / s2
        hi2 = (zhi[1] - r12 * t) / s2
        lo3 = (zlo[2] - r13 * t) / s3
        hi3 = (zhi[2] - r13 * t) / s3
        phi = math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
        return phi * bivariate_normal_rect((lo2, lo3), (hi2, hi3), rho_c)

    a, b = max(zlo[0], -9.0), min(zhi[0], 9.0)
    if a >= b:
        return 0.0
    val, _ = integrate.quad(inner, a, b, epsabs=1e-10, epsrel=1e-9, limit=200)
    return min(1.0, max(0.0, val))


# --------------------------------------------------------------------------
# equicoordinate quantile and root solving
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RootBracket:
    lo: float
    hi: float
    tol_abs: float = 1e-9

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("bracket needs lo < hi")
        if not self.tol_abs > 0:
            raise ValueError("tol_abs must be positive")


def solve_monotone_root(f: Callable[[float], float], bracket: RootBracket,
                        max_iter: int = 200) -> float:
    """Root of a monotone function on a sign-changing bracket.

    Backed by Brent's method (bisection safeguarded by secant and inverse
    quadratic steps).
    """
    flo, fhi = f(bracket.lo), f(bracket.hi)
    if flo == 0.0:
        return bracket.lo
    if fhi == 0.0:
        return bracket.hi
    if np.sign(flo) == np.sign(fhi):
        raise NoSignChangeError(
            f"no sign change on [{bracket.lo}, {bracket.hi}]: f={flo!r}, {fhi!r}"
        )
    try:
        root, info = optimize.brentq(
            f, bracket.lo, bracket.hi, xtol=bracket.tol_abs, rtol=4 * np.finfo(float).eps,
            maxiter=max_iter, full_output=True, disp=False,
        )
    except RuntimeError as exc:  # pragma: no cover - brentq raises only with disp=True
        raise RootNotConvergedError(str(exc)) from exc
    if not info.converged:
        raise RootNotConvergedError(f"root solver stopped after {info.iterations} iterations")
    return float(root)


def equicoordinate_quantile(alpha: float, rho: float) -> float:
    """d with P(Z1 <= d, Z2 <= d) = 1 - alpha under correlation ``rho``."""
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5), got {alpha!r}")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    z = std_normal_quantile(1.0 - alpha)
    # Bonferroni bound on the right
    upper = std_normal_quantile(1.0 - alpha / 2.0)
    target = 1.0 - alpha

    def f(d):
        return bivariate_normal_cdf(d, d, rho) - target

    if f(z) >= 0.0:
        return z
    d = solve_monotone_root(f, RootBracket(z, upper + 1e-9, 1e-12))
    return max(d, z)


def pooled_sd(sd_a: float, n_a: int, sd_b: float, n_b: int) -> float:
    """Two-sample pooled standard deviation."""
    if not (sd_a > 0 and sd_b > 0):
        raise ValueError("standard deviations must be positive")
    if n_a < 2 or n_b < 2:
        raise ValueError("each sample needs n >= 2")
    return math.sqrt(((n_a - 1) * sd_a ** 2 + (n_b - 1) * sd_b ** 2) / (n_a + n_b - 2))
