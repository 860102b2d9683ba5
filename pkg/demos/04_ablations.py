"""
Why not rotate, why not normalize
=================================

A random Hadamard rotation spreads a sparse update over every coordinate,
which raises the entropy of the quantized symbols. Normalizing each client
before quantizing spends bits on small updates that matter little.
"""

# %%
from rdfl.ablations import normalization_ablation, rotation_ablation
from rdfl.rd import DEFAULT_GRID
from rdfl.synthetic import synthetic_updates

sparse = synthetic_updates(10, 4096, seed=0, kind="laplace", sparsity=0.95)
print(f"{'step':>6} {'H before':>9} {'H after':>8} {'bits before':>12} {'bits after':>11}")
for r in rotation_ablation(sparse, DEFAULT_GRID[::2], seed=0):
    print(f"{r.delta:6.2f} {r.entropy:9.3f} {r.entropy_rotated:8.3f} {r.rate:12.3f} {r.rate_rotated:11.3f}")

# %%
# Client norms spread over an order of magnitude (log-normal, sigma 1).
# At matched total bits the fixed global step has lower total error.
spread = synthetic_updates(50, 1000, seed=0, norm_sigma=1.0)
cmp = normalization_ablation(spread, 1.0, seed=0)
for name, p in (("fixed step", cmp.fixed), ("normalized", cmp.normalized)):
    print(f"{name:<11} {p.bits:8d} bits   total squared error {p.distortion:9.1f}")
print(f"rate mismatch {cmp.rate_mismatch:.1%}")
