"""
Choosing the step size
======================

The step is the only knob. This script sweeps it, picks one from a bit
budget, and lets simulated clients vote on it under a Lagrange multiplier.
"""

# %%
from rdfl.rd import (
    DEFAULT_GRID,
    lambda_for_delta,
    modal_fraction,
    rd_sweep,
    select_delta_for_budget,
    vote_histogram,
    vote_mode,
)
from rdfl.synthetic import synthetic_updates

updates = synthetic_updates(40, 1000, seed=0, kind="power_law", sparsity=0.9)

# %%
# Rate falls and distortion rises as the step grows. The symbol entropy
# tracks the rate; the gap is the cost of a universal code.
curve = rd_sweep(updates, DEFAULT_GRID, seed=0)
print(f"{'step':>6} {'bits/elem':>10} {'sqerr/elem':>11} {'entropy':>8}")
for p in curve:
    print(f"{p.delta:6.2f} {p.mean_rate:10.3f} {p.mean_distortion:11.4f} {p.mean_entropy:8.3f}")

# %%
# Given a budget in bits per element, take the finest step that fits.
for budget in (1.0, 0.5, 0.2):
    print(f"budget {budget} bits/elem -> step {select_delta_for_budget(curve, budget)}")

# %%
# Each client minimises rate + lambda * distortion on its own update. With
# lambda set for a mid-grid step, most clients land on the same answer,
# which is what makes one global step workable.
lam = lambda_for_delta(1.0)
hist = vote_histogram(updates, lam, DEFAULT_GRID, seed=0)
print({k: v for k, v in hist.items() if v})
print(f"mode {vote_mode(hist)}, agreement {modal_fraction(hist):.0%}")
