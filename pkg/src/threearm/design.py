"""Design-stage calculations: success probabilities, sample sizes, allocations.

Under known sigma the observed differences D1 = X_E - X_P and
D2 = X_R - X_P are jointly normal, and for the IU, single-step and baseline
procedures every success event is an intersection of half-planes in the
(D1, D2) plane, so its probability is computed exactly (``"analytic"``).
The informative E-P bound is not linear in the data; its success
probability is a one-dimensional quadrature over X_E - X_R
(``"quadrature"``). Any method can also be simulated (:class:`MonteCarlo`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Union

import numpy as np
from scipy import special

from .sci import (
    DesignParams,
    Method,
    RhoConvention,
    _ep_level,
    _upper_quantile,
    informative_bound_er,
    single_step_quantile,
)
from .stats import halfplane_prob

ANALYTIC = "analytic"
QUADRATURE = "quadrature"

DEFAULT_N_CAP = 20000
COARSE_STEP = 0.05
FINE_STEP = 0.01
RATIO_MAX = 3.0


class UnsupportedModeError(ValueError):
    pass


class TargetUnreachableError(RuntimeError):
    """The target power is not reached below the sample-size cap."""

    def __init__(self, n_cap: int, power_at_cap: float):
        super().__init__(f"target not reached with n_E <= {n_cap} (power {power_at_cap:.4f})")
        self.n_cap = n_cap
        self.power_at_cap = power_at_cap


@dataclass(frozen=True)
class MonteCarlo:
    reps: int = 100_000
    seed: int = 20240101

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


@dataclass(frozen=True)
class EffectScenario:
    """True effects relative to placebo, in outcome units."""

    effect_EP: float
    effect_RP: float
    sigma: float
    v: Optional[float] = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @classmethod
    def from_ratio(cls, v: float, mu_R_hist: float, effect_EP: float, sigma: float):
        """Reference effect set to ``v`` times the historical reference effect."""
        return cls(effect_EP, v * mu_R_hist, sigma, v)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


@dataclass(frozen=True)
class Allocation:
    n_E: int
    c_R: float
    c_P: float

    def __post_init__(self):
        if self.c_R <= 0 or self.c_P <= 0:
            raise ValueError("allocation ratios must be positive")
        if self.n_E < 2 or self.n_R < 2 or self.n_P < 2:
            raise ValueError(f"every arm needs n >= 2, got {self.sizes}")

    @classmethod
    def from_sizes(cls, n_E: int, n_R: int, n_P: int) -> "Allocation":
        return cls(n_E, n_R / n_E, n_P / n_E)

    @property
    def n_R(self) -> int:
        return round_half_up(self.c_R * self.n_E)

    @property
    def n_P(self) -> int:
        return round_half_up(self.c_P * self.n_E)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.n_E, self.n_R, self.n_P

    @property
    def N(self) -> int:
        return sum(self.sizes)


@dataclass(frozen=True)
class MixtureScenario:
    """Discrete prior over scenarios; success is averaged with these weights."""

    components: tuple

    def __post_init__(self):
        comps = tuple((s, float(w)) for s, w in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("mixture needs at least one component")
        weights = [w for _, w in comps]
        if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must be >= 0 and sum to 1, got {weights}")

    @classmethod
    def over_ratios(cls, ratios_weights: Iterable[tuple[float, float]], mu_R_hist: float,
                    effect_EP: float, sigma: float) -> "MixtureScenario":
        return cls(tuple(
            (EffectScenario.from_ratio(v, mu_R_hist, effect_EP, sigma), w)
            for v, w in ratios_weights
        ))


class SuccessProbability(NamedTuple):
    total: float
    p_ER: float
    p_EP: float
    se: float = 0.0  # Monte Carlo standard error of ``total``; 0 for deterministic modes


@dataclass(frozen=True)
class OptimizationResult:
    method: Method
    n_E: int
    n_R: int
    n_P: int
    N: int
    achieved_power: float
    c_R: float
    c_P: float
    scenario: str = ""
    filter: str = ""

    def as_row(self) -> dict:
        return {
            "method": self.method.value,
            "scenario": self.scenario,
            "n_E": self.n_E,
            "n_R": self.n_R,
            "n_P": self.n_P,
            "N": self.N,
            "achieved_power": self.achieved_power,
        }


# --------------------------------------------------------------------------
# success probabilities
# --------------------------------------------------------------------------

class _Geometry:
    """Joint law of (D1, D2) = (X_E - X_P, X_R - X_P) for one design point."""

    def __init__(self, scenario: EffectScenario, n_E, n_R, n_P):
        s2 = scenario.sigma ** 2
        self.var_ep = s2 * (1.0 / n_E + 1.0 / n_P)
        self.var_rp = s2 * (1.0 / n_R + 1.0 / n_P)
        self.var_er = s2 * (1.0 / n_E + 1.0 / n_R)
        self.cov = s2 / n_P
        self.cov_e = s2 / n_E
        self.se_ep = math.sqrt(self.var_ep)
        self.se_rp = math.sqrt(self.var_rp)
        self.se_er = math.sqrt(self.var_er)
        self.mean = np.array([scenario.effect_EP, scenario.effect_RP])
        c11 = self.se_ep
        c21 = self.cov / c11
        c22 = math.sqrt(max(self.var_rp - c21 * c21, 0.0))
        self.chol = np.array([[c11, 0.0], [c21, c22]])

    def prob(self, constraints) -> float:
        """P(k1 D1 + k2 D2 >= t for all (k1, k2, t))."""
        k = np.array([c[:2] for c in constraints], dtype=float)
        t = np.array([c[2] for c in constraints], dtype=float)
        return halfplane_prob(k @ self.chol, t - k @ self.mean)


def _polyhedral_events(method: Method, g: _Geometry, params: DesignParams, d_alpha):
    z = params.z_alpha
    d0, d1 = params.delta0, params.delta1
    ni = (1.0, -1.0, -d0 + z * g.se_er)
    sup = (0.0, 1.0, z * g.se_rp)
    not_sup = (0.0, -1.0, -z * g.se_rp)
    gk = (1.0, 0.0, z * g.se_ep)
    if method is Method.IU:
        thr = z * (g.se_ep - g.se_er) + d0
        er = [gk, (0.0, 1.0, thr), ni]
        ep = [(0.0, -1.0, -thr), (1.0, 0.0, d1 + z * g.se_ep)]
    elif method in (Method.BASELINE, Method.INFORMATIVE):
        er = [gk, ni, sup]
        ep = [ni, not_sup, (1.0, 0.0, d1 + z * g.se_ep)]
    elif method is Method.SINGLE_STEP:
        er = [(1.0, 0.0, d_alpha * g.se_ep), sup, (1.0, -1.0, -d0 + d_alpha * g.se_er)]
        ep = [not_sup, (1.0, 0.0, d1 + d_alpha * g.se_ep)]
    else:  # pragma: no cover
        raise ValueError(method)
    return er, ep


_GL32 = np.polynomial.legendre.leggauss(32)


def _informative_ep_prob(scenario: EffectScenario, g: _Geometry, params: DesignParams) -> float:
    """P(success EP) for the informative bounds.

    Conditional on W = X_E - X_R the E-R bound, hence the level left for
    E-P, is fixed, and the remaining conditions are an interval for D1.
    """
    z = params.z_alpha
    m_w = scenario.effect_EP - scenario.effect_RP
    sd_w = g.se_er
    w_lo = max(-params.delta0 + z * g.se_er, m_w - 10.0 * sd_w)
    w_hi = m_w + 10.0 * sd_w
    if w_lo >= w_hi:
        return 0.0
    panels = max(8, int(math.ceil((w_hi - w_lo) / (0.25 * sd_w))))
    edges = np.linspace(w_lo, w_hi, panels + 1)
    x, wts = _GL32
    half = 0.5 * np.diff(edges)
    w = ((0.5 * (edges[:-1] + edges[1:]))[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * wts).ravel()

    L_er = informative_bound_er(w, g.se_er, params)
    z_lev = _upper_quantile(_ep_level(L_er, params))
    beta = g.cov_e / g.var_er
    mu = scenario.effect_EP + beta * (w - m_w)
    sd = math.sqrt(max(g.var_ep - g.cov_e * beta, 1e-300))
    lower = np.maximum(z * g.se_ep, params.delta1 + z_lev * g.se_ep)
    upper = w + z * g.se_rp
    a = (lower - mu) / sd
    b = (upper - mu) / sd
    inner = np.where(a < b, np.where(a > 0, special.ndtr(-a) - special.ndtr(-b),
                                     special.ndtr(b) - special.ndtr(a)), 0.0)
    dens = np.exp(-0.5 * ((w - m_w) / sd_w) ** 2) / (sd_w * math.sqrt(2.0 * math.pi))
    return float(np.clip(np.sum(weights * dens * inner), 0.0, 1.0))


def _sizes(alloc) -> tuple[int, int, int]:
    if isinstance(alloc, Allocation):
        return alloc.sizes
    return tuple(int(n) for n in alloc)


def success_probability(scenario: EffectScenario, alloc, params: DesignParams,
                        method: Method | str, mode: Union[str, MonteCarlo] = ANALYTIC,
                        rho_convention: RhoConvention | str = RhoConvention.EXACT
                        ) -> SuccessProbability:
    """Probability of success ER, success EP and their sum.

    ``alloc`` is an :class:`Allocation` or a tuple ``(n_E, n_R, n_P)``.
    ``mode`` is ``"analytic"`` (not available for the informative bounds),
    ``"quadrature"`` (all methods) or a :class:`MonteCarlo` instance.
    """
    method = Method(method)
    n_E, n_R, n_P = _sizes(alloc)
    d_alpha = None
    if method is Method.SINGLE_STEP:
        d_alpha = single_step_quantile(n_E, n_R, n_P, params.alpha, rho_convention)

    if isinstance(mode, MonteCarlo):
        from .simulate import simulate_counts

        counts = simulate_counts(scenario, (n_E, n_R, n_P), params, [method], mode.reps,
                                 mode.seed, rho_convention)[method]
        p_er = counts["success_er"] / mode.reps
        p_ep = counts["success_ep"] / mode.reps
        total = p_er + p_ep
        return SuccessProbability(total, p_er, p_ep, math.sqrt(total * (1 - total) / mode.reps))

    if mode == ANALYTIC and method is Method.INFORMATIVE:
        raise UnsupportedModeError(
            "informative success events are not polyhedral; use mode='quadrature' or MonteCarlo"
        )
    if mode not in (ANALYTIC, QUADRATURE):
        raise ValueError(f"unknown mode {mode!r}")

    g = _Geometry(scenario, n_E, n_R, n_P)
    er, ep = _polyhedral_events(method, g, params, d_alpha)
    p_er = g.prob(er)
    if method is Method.INFORMATIVE:
        p_ep = _informative_ep_prob(scenario, g, params)
    else:
        p_ep = g.prob(ep)
    return SuccessProbability(p_er + p_ep, p_er, p_ep)


def default_mode(method: Method | str) -> str:
    return QUADRATURE if Method(method) is Method.INFORMATIVE else ANALYTIC


def weighted_success_probability(mixture: MixtureScenario, alloc, params: DesignParams,
                                 method: Method | str, mode=None,
                                 rho_convention: RhoConvention | str = RhoConvention.EXACT) -> float:
    """Prior-weighted success probability sum_i w_i * S(scenario_i)."""
    mode = default_mode(method) if mode is None else mode
    return float(sum(
        w * success_probability(s, alloc, params, method, mode, rho_convention).total
        for s, w in mixture.components if w > 0
    ))


def _power_function(scenario, params, method, mode, rho_convention):
    mode = default_mode(method) if mode is None else mode
    if isinstance(scenario, MixtureScenario):
        return lambda sizes: weighted_success_probability(
            scenario, sizes, params, method, mode, rho_convention)
    return lambda sizes: success_probability(
        scenario, sizes, params, method, mode, rho_convention).total


# --------------------------------------------------------------------------
# sample sizes
# --------------------------------------------------------------------------

def _min_n_e(c_R: float, c_P: float) -> int:
    n = 2
    while round_half_up(c_R * n) < 2 or round_half_up(c_P * n) < 2:
        n += 1
    return n


def _sizes_for(n_E: int, c_R: float, c_P: float) -> tuple[int, int, int]:
    return n_E, round_half_up(c_R * n_E), round_half_up(c_P * n_E)


def _smallest_n(power, c_R, c_P, target, lo, hi):
    """Smallest n_E in [lo, hi] with power >= target, by integer bisection.

    Returns ``(n_E, power)``; assumes power is nondecreasing in n_E and
    that ``power(hi) >= target``.
    """
    p_hi = power(_sizes_for(hi, c_R, c_P))
    p_lo = power(_sizes_for(lo, c_R, c_P))
    if p_lo >= target:
        return lo, p_lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        p = power(_sizes_for(mid, c_R, c_P))
        if p >= target:
            hi, p_hi = mid, p
        else:
            lo = mid
    return hi, p_hi


def required_total_n(scenario, c_R: float, c_P: float, params: DesignParams,
                     method: Method | str, target: float, *, n_cap: int = DEFAULT_N_CAP,
                     mode=None, rho_convention: RhoConvention | str = RhoConvention.EXACT
                     ) -> OptimizationResult:
    """Smallest design with ratios (c_R, c_P) reaching ``target`` success probability.

    ``scenario`` may be an :class:`EffectScenario` or a :class:`MixtureScenario`.
    Raises :class:`TargetUnreachableError` when ``n_E = n_cap`` does not suffice.
    """
    method = Method(method)
    if not params.alpha < target < 1.0:
        raise ValueError("target must lie in (alpha, 1)")
    power = _power_function(scenario, params, method, mode, rho_convention)
    lo = _min_n_e(c_R, c_P)
    p_cap = power(_sizes_for(n_cap, c_R, c_P))
    if p_cap < target:
        raise TargetUnreachableError(n_cap, p_cap)
    n_E, p = _smallest_n(power, c_R, c_P, target, lo, n_cap)
    n_R, n_P = round_half_up(c_R * n_E), round_half_up(c_P * n_E)
    return OptimizationResult(method, n_E, n_R, n_P, n_E + n_R + n_P, p, c_R, c_P)


def _ratio_grid(lo: float, hi: float, step: float) -> np.ndarray:
    k = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(k + 1), 10)


def _rank(res: OptimizationResult):
    # smaller N, then smaller placebo group, then smaller c_R
    return res.N, res.n_P, res.c_R


def _search_cells(power, cells, params, target, n_cap, method, best=None):
    """Exhaustive search over (c_R, c_P) cells with incumbent pruning.

    A cell is only searched in full if the largest n_E that would not lose
    to the incumbent reaches the target; under monotone power this gives the
    same optimum as searching every cell.
    """
    for c_R, c_P in cells:
        lo = _min_n_e(c_R, c_P)
        if best is not None:
            k = 1.0 + c_R + c_P
            n_try = min(n_cap, int(best.N / k) + 2)
            while n_try >= lo and sum(_sizes_for(n_try, c_R, c_P)) > best.N:
                n_try -= 1
            if n_try < lo:
                continue
            p = power(_sizes_for(n_try, c_R, c_P))
            if p < target:
                continue
            hi = n_try
        else:
            hi = n_cap
            if power(_sizes_for(hi, c_R, c_P)) < target:
                continue
        n_E, p = _smallest_n(power, c_R, c_P, target, lo, hi)
        n_R, n_P = round_half_up(c_R * n_E), round_half_up(c_P * n_E)
        cand = OptimizationResult(method, n_E, n_R, n_P, n_E + n_R + n_P, p, float(c_R), float(c_P))
        if best is None or _rank(cand) < _rank(best):
            best = cand
    return best


def optimize_allocation(scenario, params: DesignParams, method: Method | str, target: float,
                        *, n_cap: int = DEFAULT_N_CAP, mode=None,
                        rho_convention: RhoConvention | str = RhoConvention.EXACT,
                        coarse_step: float = COARSE_STEP, fine_step: float = FINE_STEP,
                        ratio_max: float = RATIO_MAX, start: Optional[tuple] = None,
                        label: str = "") -> OptimizationResult:
    """Allocation ratios minimising the total sample size.

    Coarse grid of step ``coarse_step`` on both ratios over
    [coarse_step, ratio_max], then a ``fine_step`` grid within one coarse
    step of the coarse optimum. ``start`` seeds the incumbent with a
    known-good ratio pair, which only speeds up pruning.
    """
    method = Method(method)
    if not params.alpha < target < 1.0:
        raise ValueError("target must lie in (alpha, 1)")
    power = _power_function(scenario, params, method, mode, rho_convention)
    coarse = _ratio_grid(coarse_step, ratio_max, coarse_step)

    best = None
    if start is not None:
        best = _search_cells(power, [tuple(start)], params, target, n_cap, method)
    # visit cells outward from the middle of the grid so the incumbent improves early
    cells = sorted(((a, b) for a in coarse for b in coarse),
                   key=lambda c: (abs(c[0] - 1.0) + abs(c[1] - 1.0), c[0], c[1]))
    best = _search_cells(power, cells, params, target, n_cap, method, best)
    if best is None:
        raise TargetUnreachableError(n_cap, float("nan"))

    lo_r = max(fine_step, best.c_R - coarse_step)
    lo_p = max(fine_step, best.c_P - coarse_step)
    fine_r = _ratio_grid(lo_r, min(ratio_max, best.c_R + coarse_step), fine_step)
    fine_p = _ratio_grid(lo_p, min(ratio_max, best.c_P + coarse_step), fine_step)
    best = _search_cells(power, [(a, b) for a in fine_r for b in fine_p], params, target,
                         n_cap, method, best)
    filt = "iu" if method is Method.IU else "superiority"
    return OptimizationResult(best.method, best.n_E, best.n_R, best.n_P, best.N,
                              best.achieved_power, best.c_R, best.c_P, label, filt)
