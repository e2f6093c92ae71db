"""Simultaneous lower confidence bounds, filters and success verdicts.

Three families of simultaneous bounds for (mu_E - mu_P, mu_E - mu_R) are
provided, plus the hierarchical test without simultaneous bounds that
serves as the baseline:

* ``iu``          stepwise bounds with the intrinsic intersection-union filter
* ``informative`` stepwise bounds whose residual level decays as q**(theta + delta0)
* ``single-step`` Dunnett-type bounds with the equicoordinate quantile
* ``baseline``    hierarchical test H_EP^S -> H_ER^N -> H_EP^delta1

The informative, single-step and baseline procedures are interpreted with the
superiority filter (test of R vs P). Each procedure has a scalar entry point
working on :class:`TrialData` and a vectorised kernel working on arrays of
arm means; the simulation and design code use the kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import special

from .stats import (
    RootBracket,
    equicoordinate_quantile,
    pooled_sd,
    solve_monotone_root,
    std_normal_logsf,
    std_normal_quantile,
)

NEG_INF = -math.inf


class Method(str, Enum):
    IU = "iu"
    INFORMATIVE = "informative"
    SINGLE_STEP = "single-step"
    BASELINE = "baseline"


class FilterKind(str, Enum):
    IU = "iu"
    SUPERIORITY = "superiority"


class Verdict(str, Enum):
    SUCCESS_ER = "success-er"
    SUCCESS_EP = "success-ep"
    FAILURE = "failure"


PAIRED_FILTER = {
    Method.IU: FilterKind.IU,
    Method.INFORMATIVE: FilterKind.SUPERIORITY,
    Method.SINGLE_STEP: FilterKind.SUPERIORITY,
    Method.BASELINE: FilterKind.SUPERIORITY,
}


class PairingError(ValueError):
    """A bound family was adjudicated with the wrong filter."""


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ArmSummary:
    mean: float
    n: int
    sd: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"arm size must be an integer >= 2, got {self.n!r}")
        if self.sd is not None and not self.sd > 0:
            raise ValueError(f"arm sd must be positive, got {self.sd!r}")
        if not math.isfinite(self.mean):
            raise ValueError("arm mean must be finite")


@dataclass(frozen=True)
class TrialData:
    """Observed arm summaries.

    With ``sigma`` set the common standard deviation is treated as known.
    With ``sigma=None`` every comparison uses the pooled SD of its two arms
    (all three arm SDs are then required).
    """

    arm_E: ArmSummary
    arm_R: ArmSummary
    arm_P: ArmSummary
    sigma: Optional[float] = None

    def __post_init__(self):
        if self.sigma is not None:
            if not self.sigma > 0:
                raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        elif any(a.sd is None for a in (self.arm_E, self.arm_R, self.arm_P)):
            raise ValueError("pooled variance mode needs sd for all three arms")

    @classmethod
    def from_means(cls, x_e, x_r, x_p, n_e, n_r, n_p, sigma=None, sd_e=None,
                   sd_r=None, sd_p=None) -> "TrialData":
        return cls(ArmSummary(x_e, n_e, sd_e), ArmSummary(x_r, n_r, sd_r),
                   ArmSummary(x_p, n_p, sd_p), sigma)

    @property
    def variance_mode(self) -> str:
        return "known-sigma" if self.sigma is not None else "pooled"

    def _sd(self, a: ArmSummary, b: ArmSummary) -> float:
        if self.sigma is not None:
            return self.sigma
        return pooled_sd(a.sd, a.n, b.sd, b.n)

    @property
    def se_EP(self) -> float:
        E, P = self.arm_E, self.arm_P
        return self._sd(E, P) * math.sqrt(1.0 / E.n + 1.0 / P.n)

    @property
    def se_ER(self) -> float:
        E, R = self.arm_E, self.arm_R
        return self._sd(E, R) * math.sqrt(1.0 / E.n + 1.0 / R.n)

    @property
    def se_RP(self) -> float:
        R, P = self.arm_R, self.arm_P
        return self._sd(R, P) * math.sqrt(1.0 / R.n + 1.0 / P.n)

    @property
    def diff_EP(self) -> float:
        return self.arm_E.mean - self.arm_P.mean

    @property
    def diff_ER(self) -> float:
        return self.arm_E.mean - self.arm_R.mean

    @property
    def diff_RP(self) -> float:
        return self.arm_R.mean - self.arm_P.mean

    def shifted(self, c: float) -> "TrialData":
        """Same trial with ``c`` added to every arm mean."""
        arms = [ArmSummary(a.mean + c, a.n, a.sd) for a in (self.arm_E, self.arm_R, self.arm_P)]
        return TrialData(*arms, sigma=self.sigma)


@dataclass(frozen=True)
class DesignParams:
    alpha: float
    delta0: float
    delta1: float
    q: float = 0.01
    r: Optional[float] = None
    mu_R_hist: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 0.5), got {self.alpha!r}")
        if not self.delta0 > 0 or not self.delta1 > 0:
            raise ValueError("margins delta0 and delta1 must be positive")
        if not 0.0 < self.q < 1.0:
            raise ValueError(f"q must lie in (0, 1), got {self.q!r}")
        if self.r is not None and not 0.0 < self.r < 1.0:
            raise ValueError(f"r must lie in (0, 1), got {self.r!r}")
        if self.mu_R_hist is not None and not self.mu_R_hist > 0:
            raise ValueError("historical reference effect must be positive")
        if self.r is not None and self.mu_R_hist is not None:
            if abs(self.delta0 - self.r * self.mu_R_hist) > 1e-12 or abs(
                self.delta1 - (1.0 - self.r) * self.mu_R_hist
            ) > 1e-12:
                raise ValueError("delta0/delta1 disagree with r * mu_R_hist")

    @classmethod
    def from_historical(cls, alpha: float, r: float, mu_R_hist: float, q: float = 0.01):
        """Margins delta0 = r * mu_R_hist and delta1 = (1 - r) * mu_R_hist."""
        return cls(alpha, r * mu_R_hist, (1.0 - r) * mu_R_hist, q, r, mu_R_hist)

    @property
    def z_alpha(self) -> float:
        return std_normal_quantile(1.0 - self.alpha)


@dataclass(frozen=True)
class SciResult:
    method: Method
    ell_EP: float
    ell_ER: float
    L_EP: float
    L_ER: float
    filter_used: FilterKind
    filter_holds: bool
    levels: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "filter_holds", bool(self.filter_holds))

    @property
    def gatekeeper_rejected(self) -> bool:
        # single-step bounds carry their own gatekeeper; the stepwise ones use ell_EP
        if self.method is Method.SINGLE_STEP:
            return bool(self.L_EP >= 0.0)
        return bool(self.ell_EP >= 0.0)


@dataclass(frozen=True)
class SuccessOutcome:
    verdict: Verdict
    filter_holds: bool
    gatekeeper_rejected: bool

    def __post_init__(self):
        object.__setattr__(self, "filter_holds", bool(self.filter_holds))
        object.__setattr__(self, "gatekeeper_rejected", bool(self.gatekeeper_rejected))

    @property
    def success(self) -> bool:
        return self.verdict is not Verdict.FAILURE


# --------------------------------------------------------------------------
# unadjusted bounds and filters
# --------------------------------------------------------------------------

def unadjusted_bounds(trial: TrialData, params: DesignParams) -> tuple[float, float]:
    """Univariate (1 - alpha) lower bounds (ell_EP, ell_ER)."""
    z = params.z_alpha
    return trial.diff_EP - z * trial.se_EP, trial.diff_ER - z * trial.se_ER


def iu_filter_threshold(trial: TrialData, params: DesignParams) -> float:
    """Smallest X_R - X_P for which the IU filter declares R > P."""
    return params.z_alpha * (trial.se_EP - trial.se_ER) + params.delta0


def iu_filter(trial: TrialData, params: DesignParams) -> bool:
    # X_R - X_P >= z (se_EP - se_ER) + delta0  <=>  ell_ER + delta0 <= ell_EP;
    # the second form keeps the formal and intuitive bounds bit-identical
    ell_ep, ell_er = unadjusted_bounds(trial, params)
    return ell_er + params.delta0 <= ell_ep


def superiority_filter_threshold(trial: TrialData, params: DesignParams) -> float:
    return params.z_alpha * trial.se_RP


def superiority_filter(trial: TrialData, params: DesignParams) -> bool:
    return trial.diff_RP / trial.se_RP >= params.z_alpha


# --------------------------------------------------------------------------
# IU bounds
# --------------------------------------------------------------------------

def sci_iu_formal(trial: TrialData, params: DesignParams) -> SciResult:
    """Stepwise bounds defined branch by branch."""
    d0 = params.delta0
    ell_ep, ell_er = unadjusted_bounds(trial, params)
    if ell_ep < 0.0:
        L_ep, L_er = ell_ep, NEG_INF
    elif ell_er < -d0:
        L_ep, L_er = 0.0, ell_er
    elif ell_er + d0 <= ell_ep:
        # L_min = ell_ER + delta0, so L_min - delta0 = ell_ER
        L_ep, L_er = ell_er + d0, ell_er
    else:
        L_ep, L_er = ell_ep, ell_ep - d0
    return SciResult(Method.IU, ell_ep, ell_er, L_ep, L_er, FilterKind.IU,
                     iu_filter(trial, params), {"EP": params.alpha, "ER": params.alpha})


def sci_iu_intuitive(trial: TrialData, params: DesignParams) -> SciResult:
    """Gatekeeper first, then the IU filter picks which contrast gets the level."""
    d0 = params.delta0
    ell_ep, ell_er = unadjusted_bounds(trial, params)
    holds = iu_filter(trial, params)
    if ell_ep < 0.0:
        L_ep, L_er = ell_ep, NEG_INF
    elif holds:
        L_er = ell_er
        L_ep = max(0.0, L_er + d0)
    else:
        L_ep = ell_ep
        L_er = L_ep - d0
    return SciResult(Method.IU, ell_ep, ell_er, L_ep, L_er, FilterKind.IU, holds,
                     {"EP": params.alpha, "ER": params.alpha})


sci_iu = sci_iu_intuitive


# --------------------------------------------------------------------------
# informative bounds
# --------------------------------------------------------------------------

def informative_equation(theta, diff_er, se_er, params: DesignParams):
    """log(1 - Phi((diff_ER - theta)/se_ER)) - log(q**(theta + delta0) * alpha).

    Strictly increasing in theta; its zero is the informative E-R bound.
    """
    lhs = std_normal_logsf((diff_er - theta) / se_er)
    return lhs - (math.log(params.alpha) + (theta + params.delta0) * math.log(params.q))


def _ep_level(L_er, params: DesignParams):
    """Level left for E-P once the E-R bound sits at ``L_er``."""
    return (1.0 - params.q ** (L_er + params.delta0)) * params.alpha


def _upper_quantile(level):
    """z with 1 - Phi(z) = level; +inf for level 0."""
    level = np.asarray(level, dtype=float)
    with np.errstate(divide="ignore"):
        return -special.ndtri(level)


def sci_informative(trial: TrialData, params: DesignParams) -> SciResult:
    d0 = params.delta0
    ell_ep, ell_er = unadjusted_bounds(trial, params)
    holds = superiority_filter(trial, params)
    if ell_ep < 0.0:
        return SciResult(Method.INFORMATIVE, ell_ep, ell_er, ell_ep, NEG_INF,
                         FilterKind.SUPERIORITY, holds, {"EP": params.alpha})
    if ell_er < -d0:
        return SciResult(Method.INFORMATIVE, ell_ep, ell_er, 0.0, ell_er,
                         FilterKind.SUPERIORITY, holds,
                         {"EP": params.alpha, "ER": params.alpha})

    w, se = trial.diff_ER, trial.se_ER
    # g(-delta0) <= 0 because ell_ER >= -delta0; g(w) = log(1/2) - log(alpha q**(w+d0)) > 0
    f = lambda t: informative_equation(t, w, se, params)
    if f(-d0) >= 0.0:
        L_er = -d0
    else:
        L_er = solve_monotone_root(f, RootBracket(-d0, w, 1e-12))
    level = float(_ep_level(L_er, params))
    L_ep = max(0.0, trial.diff_EP - float(_upper_quantile(level)) * trial.se_EP)
    return SciResult(Method.INFORMATIVE, ell_ep, ell_er, L_ep, L_er,
                     FilterKind.SUPERIORITY, holds,
                     {"ER": params.alpha * params.q ** (L_er + d0), "EP": level})


# --------------------------------------------------------------------------
# single-step bounds
# --------------------------------------------------------------------------

class RhoConvention(str, Enum):
    """How the single-step correlation is formed from the allocation ratios.

    ``exact`` is the correlation of (T_EP, T_ER^N),
    sqrt(c_P c_R / ((1 + c_P)(1 + c_R))). ``tabulated`` drops the square
    root; it is the convention under which the published example tables
    come out, and it is conservative (smaller correlation, larger d_alpha).
    """

    EXACT = "exact"
    TABULATED = "tabulated"


def single_step_rho(n_e, n_r, n_p, convention: RhoConvention | str = RhoConvention.EXACT) -> float:
    c_r, c_p = n_r / n_e, n_p / n_e
    rho_sq = c_p * c_r / ((1.0 + c_p) * (1.0 + c_r))
    if RhoConvention(convention) is RhoConvention.TABULATED:
        return rho_sq
    return math.sqrt(rho_sq)


def single_step_quantile(n_e, n_r, n_p, alpha: float,
                         convention: RhoConvention | str = RhoConvention.EXACT) -> float:
    return equicoordinate_quantile(alpha, single_step_rho(n_e, n_r, n_p, convention))


def sci_single_step(trial: TrialData, params: DesignParams,
                    convention: RhoConvention | str = RhoConvention.EXACT) -> SciResult:
    rho = single_step_rho(trial.arm_E.n, trial.arm_R.n, trial.arm_P.n, convention)
    d = equicoordinate_quantile(params.alpha, rho)
    ell_ep, ell_er = unadjusted_bounds(trial, params)
    L_ep = trial.diff_EP - d * trial.se_EP
    L_er = trial.diff_ER - d * trial.se_ER
    return SciResult(Method.SINGLE_STEP, ell_ep, ell_er, L_ep, L_er,
                     FilterKind.SUPERIORITY, superiority_filter(trial, params),
                     {"EP": params.alpha, "ER": params.alpha, "d_alpha": d, "rho": rho})


# --------------------------------------------------------------------------
# baseline and adjudication
# --------------------------------------------------------------------------

def sci_baseline(trial: TrialData, params: DesignParams) -> SciResult:
    """Unadjusted bounds packaged for reporting next to the simultaneous ones."""
    ell_ep, ell_er = unadjusted_bounds(trial, params)
    return SciResult(Method.BASELINE, ell_ep, ell_er, ell_ep, ell_er,
                     FilterKind.SUPERIORITY, superiority_filter(trial, params),
                     {"EP": params.alpha, "ER": params.alpha})


def _hierarchy(ell_ep, ell_er, holds, params):
    gk = ell_ep >= 0.0
    if gk and ell_er >= -params.delta0:
        if holds:
            return SuccessOutcome(Verdict.SUCCESS_ER, holds, gk)
        if ell_ep >= params.delta1:
            return SuccessOutcome(Verdict.SUCCESS_EP, holds, gk)
    return SuccessOutcome(Verdict.FAILURE, holds, gk)


def baseline_hierarchical(trial: TrialData, params: DesignParams) -> SuccessOutcome:
    """Test H_EP^S, H_ER^N, H_EP^delta1 in order at full level.

    Success ER needs the first two rejections and the superiority filter;
    success EP needs all three rejections with the filter failing.
    """
    ell_ep, ell_er = unadjusted_bounds(trial, params)
    return _hierarchy(ell_ep, ell_er, superiority_filter(trial, params), params)


def adjudicate_success(result: SciResult, params: DesignParams) -> SuccessOutcome:
    if PAIRED_FILTER[result.method] is not result.filter_used:
        raise PairingError(
            f"{result.method.value} bounds must be read with the "
            f"{PAIRED_FILTER[result.method].value} filter, got {result.filter_used.value}"
        )
    if result.method is Method.BASELINE:
        return _hierarchy(result.ell_EP, result.ell_ER, result.filter_holds, params)
    gk = result.gatekeeper_rejected
    if gk and result.filter_holds and result.L_ER >= -params.delta0:
        verdict = Verdict.SUCCESS_ER
    elif gk and not result.filter_holds and result.L_EP >= params.delta1:
        verdict = Verdict.SUCCESS_EP
    else:
        verdict = Verdict.FAILURE
    return SuccessOutcome(verdict, result.filter_holds, gk)


SCI_FUNCTIONS = {
    Method.IU: sci_iu_intuitive,
    Method.INFORMATIVE: sci_informative,
    Method.SINGLE_STEP: sci_single_step,
    Method.BASELINE: sci_baseline,
}


def analyze(trial: TrialData, params: DesignParams, method: Method | str,
            rho_convention: RhoConvention | str = RhoConvention.EXACT):
    """Bounds and verdict for one method."""
    method = Method(method)
    if method is Method.SINGLE_STEP:
        result = sci_single_step(trial, params, rho_convention)
    else:
        result = SCI_FUNCTIONS[method](trial, params)
    return result, adjudicate_success(result, params)


# --------------------------------------------------------------------------
# vectorised kernels (arrays of observed differences, known standard errors)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StandardErrors:
    ep: float
    er: float
    rp: float

    @classmethod
    def known_sigma(cls, sigma, n_e, n_r, n_p) -> "StandardErrors":
        return cls(sigma * math.sqrt(1 / n_e + 1 / n_p),
                   sigma * math.sqrt(1 / n_e + 1 / n_r),
                   sigma * math.sqrt(1 / n_r + 1 / n_p))


def informative_bound_er(diff_er, se_er: float, params: DesignParams, tol: float = 1e-12,
                         max_iter: int = 200):
    """Vectorised root of :func:`informative_equation` on [-delta0, diff_ER].

    Safeguarded Newton iteration; entries whose bracket is degenerate
    (diff_ER + delta0 below z_alpha * se_ER) come back as ``-delta0``.
    """
    w = np.asarray(diff_er, dtype=float)
    d0 = params.delta0
    log_a, log_q = math.log(params.alpha), math.log(params.q)
    lo = np.full_like(w, -d0)
    hi = np.maximum(w, -d0)

    def g(t):
        return special.log_ndtr(-(w - t) / se_er) - (log_a + (t + d0) * log_q)

    needs_root = g(lo) < 0.0
    active = needs_root.copy()
    t = 0.5 * (lo + hi)
    for _ in range(max_iter):
        if not active.any():
            break
        u = (w - t) / se_er
        gv = special.log_ndtr(-u) - (log_a + (t + d0) * log_q)
        # d/dt log sf(u) = pdf(u) / (sf(u) se)
        dg = np.exp(-0.5 * u * u - 0.5 * math.log(2 * math.pi) - special.log_ndtr(-u)) / se_er - log_q
        lo = np.where(gv < 0.0, t, lo)
        hi = np.where(gv > 0.0, t, hi)
        step = t - gv / dg
        inside = (step > lo) & (step < hi)
        t_new = np.where(inside, step, 0.5 * (lo + hi))
        done = (np.abs(t_new - t) <= tol) | (gv == 0.0) | (hi - lo <= tol)
        t = np.where(active, t_new, t)
        active &= ~done
    return np.where(needs_root, t, -d0)


def bounds_kernel(method: Method, d_ep, d_er, d_rp, se: StandardErrors,
                  params: DesignParams, d_alpha: Optional[float] = None):
    """Array version of the bound constructors and the paired filter.

    Returns ``(gatekeeper, filter_holds, L_EP, L_ER, success_er, success_ep)``
    as arrays. ``d_ep``, ``d_er``, ``d_rp`` are observed differences of means.
    """
    d_ep = np.asarray(d_ep, dtype=float)
    d_er = np.asarray(d_er, dtype=float)
    d_rp = np.asarray(d_rp, dtype=float)
    z = params.z_alpha
    d0, d1 = params.delta0, params.delta1
    ell_ep = d_ep - z * se.ep
    ell_er = d_er - z * se.er
    sup = d_rp / se.rp >= z

    if method is Method.IU:
        gk = ell_ep >= 0.0
        holds = ell_er + d0 <= ell_ep
        L_er = np.where(gk, np.where(holds, ell_er, ell_ep - d0), -np.inf)
        L_ep = np.where(gk, np.where(holds, np.maximum(0.0, ell_er + d0), ell_ep), ell_ep)
        s_er = gk & holds & (L_er >= -d0)
        s_ep = gk & ~holds & (L_ep >= d1)
        return gk, holds, L_ep, L_er, s_er, s_ep

    if method is Method.BASELINE:
        gk = ell_ep >= 0.0
        ni = gk & (ell_er >= -d0)
        s_er = ni & sup
        s_ep = ni & ~sup & (ell_ep >= d1)
        return gk, sup, ell_ep, ell_er, s_er, s_ep

    if method is Method.SINGLE_STEP:
        if d_alpha is None:
            raise ValueError("single-step kernel needs d_alpha")
        L_ep = d_ep - d_alpha * se.ep
        L_er = d_er - d_alpha * se.er
        gk = L_ep >= 0.0
        s_er = gk & sup & (L_er >= -d0)
        s_ep = gk & ~sup & (L_ep >= d1)
        return gk, sup, L_ep, L_er, s_er, s_ep

    if method is Method.INFORMATIVE:
        gk = ell_ep >= 0.0
        ni = gk & (ell_er >= -d0)
        L_er = np.where(gk, ell_er, -np.inf)
        L_ep = np.where(gk, 0.0, ell_ep)
        if ni.any():
            root = informative_bound_er(d_er[ni], se.er, params)
            level = _ep_level(root, params)
            L_er[ni] = root
            L_ep[ni] = np.maximum(0.0, d_ep[ni] - _upper_quantile(level) * se.ep)
        s_er = gk & sup & (L_er >= -d0)
        s_ep = gk & ~sup & (L_ep >= d1)
        return gk, sup, L_ep, L_er, s_er, s_ep

    raise ValueError(f"unknown method {method!r}")
