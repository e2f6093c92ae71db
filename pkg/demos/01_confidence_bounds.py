# %% [markdown]
# Simultaneous lower bounds for a three-arm trial
#
# Arms: experimental (E), active reference (R), placebo (P). Common sigma = 2,
# n = 356 / 348 / 145, alpha = 0.025, margins delta0 = delta1 = 0.5.

# %%
from threearm import DesignParams, Method, RhoConvention, TrialData, analyze
from threearm.sci import iu_filter_threshold, superiority_filter_threshold

params = DesignParams(alpha=0.025, delta0=0.5, delta1=0.5, q=0.01)


def trial(x_e, x_r):
    return TrialData.from_means(x_e, x_r, 0.0, 356, 348, 145, sigma=2.0)


# %%
# "R > P" is declared once X_R clears these thresholds
t = trial(1.0, 1.0)
print("IU filter threshold          ", round(iu_filter_threshold(t, params), 4))
print("superiority filter threshold ", round(superiority_filter_threshold(t, params), 4))

# %%
# Four observed outcomes, every method side by side
print(f"{'X_E':>5} {'X_R':>5}  {'method':<12} {'filter':>6} {'L_EP':>8} {'L_ER':>8}  verdict")
for x_e, x_r in [(1.0, 1.0), (1.0, 0.5), (1.0, 0.3), (0.8, 0.3)]:
    for m in (Method.IU, Method.INFORMATIVE, Method.SINGLE_STEP):
        res, out = analyze(trial(x_e, x_r), params, m)
        print(f"{x_e:5.2f} {x_r:5.2f}  {m.value:<12} {str(res.filter_holds):>6} "
              f"{res.L_EP:8.4f} {res.L_ER:8.4f}  {out.verdict.value}")

# %%
# The single-step quantile depends on how the correlation is formed.
# The tabulated convention (no square root) is slightly more conservative.
for conv in RhoConvention:
    res, _ = analyze(trial(1.0, 1.0), params, Method.SINGLE_STEP, conv)
    print(f"{conv.value:<10} d_alpha = {res.levels['d_alpha']:.5f}  L_EP = {res.L_EP:.4f}")

# %% [markdown]
# Depression trial: pooled SDs, margins 2.5

# %%
clinical = DesignParams(0.025, 2.5, 2.5)
for x_e in (10.2, 12.2):
    t = TrialData.from_means(x_e, 9.4, 8.3, 147, 148, 145, sd_e=6.1, sd_r=6.9, sd_p=5.8)
    for m in Method:
        res, out = analyze(t, clinical, m)
        print(f"X_E={x_e:<5} {m.value:<12} ell=({res.ell_EP:.3f}, {res.ell_ER:.3f}) "
              f"L=({res.L_EP:.3f}, {res.L_ER:.3f}) {out.verdict.value}")
