"""Seeded Monte Carlo study of the operating characteristics.

Arm means are drawn directly, X_i ~ N(mu_i, sigma^2 / n_i), which is exact
for normal data with known sigma. Draws come from per-block Philox streams
(see :mod:`threearm.rng`), so a summary depends only on (config, seed, reps).
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .design import EffectScenario, _sizes
from .rng import BLOCK_SIZE, block_ranges, standard_normals
from .sci import (
    DesignParams,
    Method,
    RhoConvention,
    StandardErrors,
    bounds_kernel,
    single_step_quantile,
)

ALL_METHODS = (Method.BASELINE, Method.IU, Method.INFORMATIVE, Method.SINGLE_STEP)

CSV_COLUMNS = ["v", "method", "filter_rate", "pos_total", "pos_ER", "pos_EP",
               "median_L_EP", "median_L_ER", "reps", "seed"]


@dataclass(frozen=True)
class SimulationConfig:
    scenario: EffectScenario
    alloc: tuple  # (n_E, n_R, n_P)
    params: DesignParams
    methods: tuple = ALL_METHODS
    reps: int = 100_000
    seed: int = 20240101
    rho_convention: RhoConvention = RhoConvention.EXACT

    def __post_init__(self):
        object.__setattr__(self, "alloc", _sizes(self.alloc))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        object.__setattr__(self, "rho_convention", RhoConvention(self.rho_convention))
        if int(self.reps) != self.reps or self.reps < 1:
            raise ValueError("reps must be an integer >= 1")
        if not self.methods:
            raise ValueError("at least one method is required")
        if min(self.alloc) < 2:
            raise ValueError("every arm needs n >= 2")


@dataclass(frozen=True)
class MethodSummary:
    method: Method
    filter_rate: float
    pos_total: float
    pos_ER: float
    pos_EP: float
    median_L_EP: float
    median_L_ER: float
    median_L_ER_infinite: bool = False


@dataclass(frozen=True)
class SimulationSummary:
    v: Optional[float]
    reps: int
    seed: int
    methods: dict = field(default_factory=dict)

    def __getitem__(self, method) -> MethodSummary:
        return self.methods[Method(method)]

    def rows(self) -> list[dict]:
        out = []
        for m, s in self.methods.items():
            out.append({
                "v": "" if self.v is None else self.v,
                "method": m.value,
                "filter_rate": s.filter_rate,
                "pos_total": s.pos_total,
                "pos_ER": s.pos_ER,
                "pos_EP": s.pos_EP,
                "median_L_EP": s.median_L_EP,
                "median_L_ER": s.median_L_ER,
                "reps": self.reps,
                "seed": self.seed,
            })
        return out


def _block(scenario, sizes, params, methods, seed, b, count, d_alpha):
    n_E, n_R, n_P = sizes
    z = standard_normals(seed, b, count)
    s = scenario.sigma
    x_e = scenario.effect_EP + s / math.sqrt(n_E) * z[:, 0]
    x_r = scenario.effect_RP + s / math.sqrt(n_R) * z[:, 1]
    x_p = s / math.sqrt(n_P) * z[:, 2]
    se = StandardErrors.known_sigma(s, n_E, n_R, n_P)
    out = {}
    for m in methods:
        _, holds, L_ep, L_er, s_er, s_ep = bounds_kernel(
            m, x_e - x_p, x_e - x_r, x_r - x_p, se, params, d_alpha)
        out[m] = (int(holds.sum()), int(s_er.sum()), int(s_ep.sum()), L_ep, L_er)
    return out


def _run_blocks(scenario, sizes, params, methods, reps, seed, rho_convention, workers):
    d_alpha = None
    if Method.SINGLE_STEP in methods:
        d_alpha = single_step_quantile(*sizes, params.alpha, rho_convention)
    ranges = list(block_ranges(reps, BLOCK_SIZE))

    def job(r):
        b, start, stop = r
        return _block(scenario, sizes, params, methods, seed, b, stop - start, d_alpha)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, ranges))
    else:
        results = [job(r) for r in ranges]
    return results


def simulate_counts(scenario: EffectScenario, alloc, params: DesignParams,
                    methods: Sequence, reps: int, seed: int,
                    rho_convention=RhoConvention.EXACT, workers: int = 1) -> dict:
    """Raw counts of filter and success events per method."""
    methods = tuple(Method(m) for m in methods)
    results = _run_blocks(scenario, _sizes(alloc), params, methods, reps, seed,
                          rho_convention, workers)
    counts = {}
    for m in methods:
        counts[m] = {
            "filter": sum(r[m][0] for r in results),
            "success_er": sum(r[m][1] for r in results),
            "success_ep": sum(r[m][2] for r in results),
        }
    return counts


def _median(x: np.ndarray) -> tuple[float, bool]:
    # -inf sorts below every real; report -inf once it reaches the middle
    n = x.size
    srt = np.sort(x)
    lo, hi = srt[(n - 1) // 2], srt[n // 2]
    if np.isneginf(lo):
        return -math.inf, True
    return float(0.5 * (lo + hi)), False


def run_simulation(config: SimulationConfig, workers: int = 1, v: Optional[float] = None
                   ) -> SimulationSummary:
    """Filter rates, success probabilities and median bounds for each method."""
    results = _run_blocks(config.scenario, config.alloc, config.params, config.methods,
                          config.reps, config.seed, config.rho_convention, workers)
    reps = config.reps
    per_method = {}
    for m in config.methods:
        n_filter = sum(r[m][0] for r in results)
        n_er = sum(r[m][1] for r in results)
        n_ep = sum(r[m][2] for r in results)
        L_ep = np.concatenate([r[m][3] for r in results])
        L_er = np.concatenate([r[m][4] for r in results])
        med_ep, _ = _median(L_ep)
        med_er, inf_flag = _median(L_er)
        p_er, p_ep = n_er / reps, n_ep / reps
        # total as the float sum so the decomposition holds bit for bit
        per_method[m] = MethodSummary(m, n_filter / reps, p_er + p_ep, p_er, p_ep,
                                      med_ep, med_er, inf_flag)
    if v is None:
        v = config.scenario.v
    return SimulationSummary(v, reps, config.seed, per_method)


def sweep_v(base: SimulationConfig, v_grid: Iterable[float], mu_R_hist: float,
            workers: int = 1) -> list[SimulationSummary]:
    """One simulation per reference-effect ratio ``v`` (effect_RP = v * mu_R_hist)."""
    out = []
    for v in v_grid:
        if not 0.0 <= v <= 1.2:
            raise ValueError(f"v must lie in [0, 1.2], got {v}")
        scen = replace(base.scenario, effect_RP=v * mu_R_hist, v=v)
        out.append(run_simulation(replace(base, scenario=scen), workers, v))
    return out


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isinf(x):
            return "-inf" if x < 0 else "inf"
        return repr(x)
    return str(x)


def summaries_to_csv(summaries: Iterable[SimulationSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for s in summaries:
        for row in s.rows():
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()
