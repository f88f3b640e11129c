"""
Effect heterogeneity by covariate decile
========================================
"""

# %%
import numpy as np
import pandas as pd

import gpmix

sim = gpmix.gen_case_b(n=250, seed=1)
hp = gpmix.default_hyperparams(sim.dataset.x, s0_sq=1e4, s_sq=1e4)
draws = gpmix.run_gibbs_known(sim.dataset, hp, gpmix.McmcConfig(total_iters=2000, burn_in=500, seed=1))
cate = gpmix.cate_draws(draws)

# %%
# Bin means are computed draw by draw, so the interval reflects posterior
# correlation between units in the same bin.
x3 = sim.dataset.x[:, 2]
tab = gpmix.bin_by_quantile(x3, cate, n_bins=10)
bins = pd.qcut(pd.Series(x3).rank(method="first"), 10, labels=False)
tab["truth"] = pd.Series(sim.true_cate).groupby(bins).mean().to_numpy()
print(tab.round(2).to_string(index=False))

# %%
print("slope of bin means on x3:", np.polyfit(tab["mean_value"], tab["point"], 1)[0].round(2))
