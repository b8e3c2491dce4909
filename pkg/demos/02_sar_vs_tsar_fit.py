"""Fit the Gaussian and the Student-t spatial autoregression side by side.

Data are simulated with heavy-tailed (t, nu=4) errors whose scale differs by
region. The t model recovers the tail index and earns a visibly higher
log-likelihood; the Gaussian model still estimates beta and lambda well.
"""

import numpy as np

from heavysar import (
    StudyConfig,
    fit_sar,
    fit_tsar,
    local_regression_variance_matrix,
    s_hat,
    simulate_tsar,
)

config = StudyConfig(n=400, k=20, nu=4.0, lam=0.6, replications=1, seed=5)
rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(5)))
lat_min, lat_max, lon_min, lon_max = config.window
locations = np.column_stack([
    rng.uniform(lat_min, lat_max, config.n),
    rng.uniform(lon_min, lon_max, config.n),
])
y, x, w, true_scale = simulate_tsar(config, config.regions(), locations, rng)

# heteroscedastic error scale estimated from OLS residual neighborhoods
sigma_eps = local_regression_variance_matrix(x, y, w)

gaussian = fit_sar(y, x, w, sigma_eps)
student = fit_tsar(y, x, w, sigma_eps)  # nu estimated over [3, 20]

print(f"true beta[1] = {config.beta[1]}, lambda = {config.lam}, nu = {config.nu}")
print(f"{'':>12} {'SAR':>10} {'tSAR':>10}")
print(f"{'beta[1]':>12} {gaussian.beta[1]:>10.3f} {student.beta[1]:>10.3f}")
print(f"{'lambda':>12} {gaussian.lam:>10.3f} {student.lam:>10.3f}")
print(f"{'s_hat':>12} {s_hat(gaussian):>10.3f} {s_hat(student):>10.3f}")
print(f"{'nu':>12} {'-':>10} {student.nu:>10.2f}")
print(f"{'loglik':>12} {gaussian.loglik:>10.1f} {student.loglik:>10.1f}")

print("\ncoefficient table (tSAR):")
for j in range(x.shape[1]):
    print(f"  beta[{j}] = {student.beta[j]: .3f}  se = {student.se_beta[j]:.3f} "
          f"z = {student.z_scores[j]: .2f}  p = {student.p_values[j]:.3g}")
print("note: standard errors treat lambda as known, so they run small")
