"""Outer-circle flux of a harmonic function on the annulus 1 < r < 3.

The inner circle carries f = sin t - sin(2t)/2 and zero flux. The outer
flux 4/9 sin t - 40/27 sin 2t is unknown to the iteration. The second mode
is amplified much more strongly, so it converges far more slowly.
"""

import numpy as np

from cauchy_mann import IterationConfig, SuccessiveDiff, mann_mazya_run
from cauchy_mann.experiments import annulus_problem, relative_trace_errors
from cauchy_mann.geometry import boundary_modes

problem = annulus_problem(33, 256)
op = problem.op

cfg = IterationConfig(max_iter=2000, stop=SuccessiveDiff(1e-3), snapshots=(5, 10, 25, 50, 150))
rec = mann_mazya_run(op, np.zeros(op.size), cfg, reference=problem.exact_flux)
print(f"stopped after {rec.stop_index} steps ({rec.stop_reason})")

for k, flux_err, trace_err in relative_trace_errors(problem, rec):
    coeffs, _ = boundary_modes(op.wrap(rec.snapshots[k]))
    c1, c2 = abs(coeffs[1]), abs(coeffs[2])
    print(f"k={k:4d}  flux err {flux_err:.3f}  trace err {trace_err:.3f}  |mode 1| {c1:.4f}  |mode 2| {c2:.4f}")

coeffs, _ = boundary_modes(op.wrap(problem.exact_flux))
print(f"exact: |mode 1| {abs(coeffs[1]):.4f}  |mode 2| {abs(coeffs[2]):.4f}")
