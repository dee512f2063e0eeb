"""Covariate-dependent censoring: plain vs IPCW pseudo values in a regression.

Event times follow a proportional hazards law with log hazard ratio 1; the
censoring times follow the SAME law, so high-risk subjects are censored
early and the plain pseudo values are biased.  The pseudo-value regression
with complementary log-log link estimates the log hazard ratio, making the
bias directly visible, and the IPCW pseudo values remove it.
"""

import numpy as np

import pseudosurv as ps

replicates = 8
levels = [0.1, 0.2, 0.3, 0.4, 0.5]
plain, weighted = [], []
for rep in range(replicates):
    data = ps.gen_cox(ps.CoxSimSpec(n=2000, dependent_censoring=True, seed=500 + rep))
    grid = ps.make_grid(data, percentiles=levels)
    plain.append(ps.fit_gee(data, grid, ipcw=False).beta[0])
    weighted.append(ps.fit_gee(data, grid, ipcw=True).beta[0])

plain = np.asarray(plain)
weighted = np.asarray(weighted)

print(f"{replicates} replicates, n=2000 each, true log hazard ratio = 1.0")
print()
print("estimator          mean   bias     mse")
print(f"pseudo GEE        {plain.mean():6.3f}  {plain.mean() - 1:+.3f}  {np.mean((plain - 1) ** 2):.4f}")
print(f"pseudo GEE, IPCW  {weighted.mean():6.3f}  {weighted.mean() - 1:+.3f}  {np.mean((weighted - 1) ** 2):.4f}")
print()
print("The same correction is available throughout the package: pass a")
print("WeightFunction to pseudo_conditional (or --ipcw on the command line)")
print("to train the regressor on IPCW pseudo values.")
