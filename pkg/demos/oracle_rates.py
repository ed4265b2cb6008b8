"""Rates on the diagonal model of the rectangle problem.

On the strip of height 3/4 the linear part is diagonal in the sine basis
with eigenvalues tanh(2 pi j)^2. Iterates have a closed form, so stopping
indices far beyond anything a grid run could reach are cheap to compute.
"""

import numpy as np

from cauchy_mann import SpectralOperator, run_rate_experiment, semi_convergence, stopping_law
from cauchy_mann.experiments import log_grid
from cauchy_mann.spectral import variation

op = SpectralOperator(50)
print("spectral gaps 1 - lambda_j:", np.array2string(op.gap[:4], precision=3))

eps = np.logspace(-2, -5, 7)
ks, slope = stopping_law(op, eps, mu=3.0)
print("\n      eps         k(eps)")
for e, k in zip(eps, ks):
    print(f"{e:9.1e}  {k:13d}")
print(f"fitted exponent {slope:.3f} (the bound predicts at most -2)")

for p in (1.0, 2.0):
    t = run_rate_experiment(op, p, np.ones(op.N), eps, ks=log_grid(100, 1e4, 11), normalize=True)
    ratio = t.error_ratio()
    print(f"\np={p:g}: envelope variation {variation(t.envelope()):.3f}, "
          f"noisy error ratio in [{ratio.min():.3g}, {ratio.max():.3g}]")

sc = semi_convergence(op, noise_level=0.05)
print(f"\n5% noise: error minimum at k={sc.k_min:.3g}, discrepancy stop at k={sc.k_stop}, "
      f"stopped/minimal error {sc.err_stop / sc.err_min:.3f}")
