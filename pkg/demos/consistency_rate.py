"""
Root-n consistency in a small Monte Carlo study
===============================================

Mean DM is computed over a few replications at increasing sample sizes
and regressed on 1/sqrt(n).  A positive slope with a high R^2 is the
empirical signature of root-n convergence.
"""

from cqspace import consistency_sweep

result = consistency_sweep("I", n_grid=[200, 400, 800, 1600], tau=0.5, n_reps=8, p=6, seed=5)

print(" n      1/sqrt(n)  mean DM")
for n, inv, dm in zip(result.n, result.inv_sqrt_n, result.dm_mean):
    print(f"{n:<6} {inv:.4f}     {dm:.4f}")
print(f"slope={result.slope:.3f} intercept={result.intercept:.4f} R^2={result.r_squared:.3f}")
