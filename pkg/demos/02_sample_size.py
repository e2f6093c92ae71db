# %% [markdown]
# Sample size planning
#
# True E-P effect 1, historical reference effect 1, sigma 2. The reference
# effect in the new trial is v times the historical one.

# %%
from threearm import (
    DesignParams,
    EffectScenario,
    Method,
    MixtureScenario,
    optimize_allocation,
    required_total_n,
    success_probability,
    weighted_success_probability,
)

params = DesignParams(0.025, 0.5, 0.5, 0.01)
full = EffectScenario.from_ratio(1.0, mu_R_hist=1.0, effect_EP=1.0, sigma=2.0)
half = EffectScenario.from_ratio(0.5, mu_R_hist=1.0, effect_EP=1.0, sigma=2.0)

# %%
# Success probability splits into "non-inferior to a strong reference" (ER)
# and "delta1-superior to placebo" (EP)
sizes = (356, 348, 145)
for m in Method:
    mode = "quadrature" if m is Method.INFORMATIVE else "analytic"
    sp = success_probability(full, sizes, params, m, mode)
    print(f"{m.value:<12} total {sp.total:.4f} = ER {sp.p_ER:.4f} + EP {sp.p_EP:.4f}")

# %%
# Smallest trial at fixed ratios n_R/n_E and n_P/n_E
res = required_total_n(full, 350 / 345, 102 / 345, params, Method.BASELINE, target=0.9)
print("fixed ratios:", (res.n_E, res.n_R, res.n_P), "N =", res.N,
      "power", round(res.achieved_power, 4))

# %%
# Full allocation search (grid 0.05, refined to 0.01) for two reference strengths
for label, scen in [("v=1", full), ("v=0.5", half)]:
    res = optimize_allocation(scen, params, Method.BASELINE, 0.9, label=label)
    print(label, (res.n_E, res.n_R, res.n_P), "N =", res.N, f"c_R={res.c_R} c_P={res.c_P}")

# %%
# Uncertain reference strength: weight v = 1 with p and v = 3/4 with 1 - p
for p in (1.0, 0.5, 0.0):
    prior = MixtureScenario.over_ratios([(1.0, p), (0.75, 1 - p)], 1.0, 1.0, 2.0)
    s = weighted_success_probability(prior, sizes, params, Method.BASELINE)
    print(f"p = {p:.1f}: weighted success {s:.4f}")
