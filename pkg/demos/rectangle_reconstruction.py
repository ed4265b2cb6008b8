"""Recover the top-side flux of a harmonic function on (0,1) x (0,3/4).

Dirichlet data sin(pi x) and zero flux are given on the bottom side, the
vertical sides carry zero Dirichlet data and nothing is known on the top.
The exact solution is cosh(pi y) sin(pi x). We run the averaged iteration
with and without restarts and watch the trace error on the top side.
"""

import numpy as np

from cauchy_mann import IterationConfig, MaxIterOnly, mann_mazya_run, restart_run
from cauchy_mann.experiments import rectangle_problem, relative_trace_errors

problem = rectangle_problem(65, 49)
op = problem.op
print(f"unknowns on the top side: {op.size}")

lam = op.spectrum()
print(f"eigenvalues of the linear part for sine modes 1..4: {np.round(lam[:4], 6)}")

cfg = IterationConfig(max_iter=500, stop=MaxIterOnly(), snapshots=(50, 100, 250, 500))
plain = mann_mazya_run(op, np.zeros(op.size), cfg, reference=problem.exact_flux)
restarted = restart_run(op, np.zeros(op.size), cfg, restart_every=50, reference=problem.exact_flux)

print("\n   k   plain trace err   restarted trace err")
for (k, _, a), (_, _, b) in zip(relative_trace_errors(problem, plain), relative_trace_errors(problem, restarted)):
    print(f"{k:4d}   {a:15.4f}   {b:19.4f}")

# the flux lives in mode 1: Picard steps shrink its error geometrically, the
# 1/k average only like 1/k; restarting discards the slow running mean
gap = 1 - lam[0]
print(f"\nmode-1 gap {gap:.3e}; plain Picard would need about {np.log(20) / gap:.0f} steps for 5%")
