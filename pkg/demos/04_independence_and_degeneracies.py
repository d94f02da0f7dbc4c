#!/usr/bin/env python3
"""Monte-Carlo evidence for derivative-column independence, and the ways it fails.

Random networks almost always have linearly independent derivative columns,
which is exactly what the Gauss-Newton theory needs.  The known exceptions
are constructed explicitly here: mirrored units (even activation
derivative), duplicated units, vanishing output weights, and the ReLU
scaling homogeneity.
"""

import numpy as np

from gncoder import (
    Activation,
    Params,
    independence_report,
    independence_trial,
    make_grid,
    merge_duplicate,
    merge_mirrored,
    sample_params,
)

act = Activation.sigmoid(1.0)
grid = make_grid(2, 64)
TRIALS = 100

print(f"=== {TRIALS} random trials: 3 units, 2 inputs, 64x64 grid ===")
degenerate = 0
min_sv = np.inf
for i in range(TRIALS):
    report = independence_trial(act, 3, 2, grid, box=(-5, 5), seed=7000 + i)
    degenerate += report.degenerate
    min_sv = min(min_sv, report.min_singular_value)
print(f"degenerate: {degenerate}/{TRIALS}; smallest singular value seen: {min_sv:.2e}")
print("(the rank tolerance sits at 1e-10 relative, orders of magnitude below)")

rng = np.random.default_rng(5)
base = sample_params(rng, 3, 2, box=(-5, 5), alpha_band=0.5)
print("\n=== constructed degeneracies ===")
for label, params, activation in (
    ("mirrored units (alpha, -w, -theta)", merge_mirrored(base), act),
    ("duplicated unit", merge_duplicate(base), act),
):
    report = independence_report(params, activation, grid)
    print(f"{label:<36}: degenerate = {report.degenerate}, "
          f"rank {report.rank}/{params.n_star}")

zeroed = Params(np.concatenate([[0.0], base.alpha[1:]]), base.w, base.theta)
report = independence_report(zeroed, act, grid)
print(f"{'vanishing output weight':<36}: degenerate = {report.degenerate}, "
      f"rank {report.rank}/{zeroed.n_star} "
      f"(the dead unit loses its {base.input_dim + 1} inner columns)")

print("\n=== the mirror trick needs an even activation derivative ===")
grid1 = make_grid(1, 64)
small = sample_params(np.random.default_rng(4), 2, 1, box=(-3, 3), alpha_band=0.5)
ts = np.linspace(-5, 5, 41)
for activation in (Activation.sigmoid(1.0), Activation.tanh(), Activation.relu()):
    try:
        even = bool(np.allclose(activation.d1(ts), activation.d1(-ts)))
    except Exception:
        even = None
    base_rep = independence_report(small, activation, grid1)
    mirror_rep = independence_report(merge_mirrored(small), activation, grid1)
    print(f"{activation.descriptor:<10}: derivative even = {even}, "
          f"base degenerate = {base_rep.degenerate}, "
          f"mirrored degenerate = {mirror_rep.degenerate}")
print("(relu is degenerate even unmirrored: relu(z) = z * 1(z>0), so each")
print(" unit's output column is a combination of its own inner columns)")
