"""
Four other ways to send an update
=================================

Top-K, QSGD, DRIVE and 3LC side by side with the entropy-coded quantizer
on the same update. Distortion is squared error per element.
"""

# %%
import numpy as np

from rdfl import encode_update, decode_update, make_rng
from rdfl.baselines import BaselineConfig, baseline_encode, decode_any
from rdfl.synthetic import synthetic_updates

# half the coordinates are non-zero, so Top-K at 10% must drop real signal
u = synthetic_updates(1, 4000, seed=3, sparsity=0.5)[0].values


def row(name, e, decoded):
    err = decoded - u
    print(f"{name:<14} {len(e.payload) / u.size:6.3f} bits/elem   {err @ err / u.size:9.4f} sqerr/elem")


# %%
for step in (0.5, 2.0):
    e = encode_update(u, step, make_rng(0, "ours"))
    row(f"ours {step}", e, decode_update(e))

configs = [
    BaselineConfig("topk", topk_fraction=0.1),
    BaselineConfig("qsgd", qsgd_levels=4),
    BaselineConfig("drive", seed=11),
    BaselineConfig("tlc", tlc_sparsity=1.0),
    BaselineConfig("none"),
]
for cfg in configs:
    e = baseline_encode(u, cfg, make_rng(0, cfg.method))
    row(cfg.method, e, decode_any(e))

# %%
# Top-K is biased: the dropped coordinates never arrive. The stochastic
# schemes are unbiased, which a few hundred repeats make visible.
means = {}
for name, fn in {
    "topk": lambda r: decode_any(baseline_encode(u, BaselineConfig("topk", topk_fraction=0.1), r)),
    "ours 2.0": lambda r: decode_update(encode_update(u, 2.0, r)),
}.items():
    means[name] = np.mean([fn(make_rng(i, name)) for i in range(300)], axis=0)
    print(f"{name:<10} |mean decode - u| / |u| = {np.linalg.norm(means[name] - u) / np.linalg.norm(u):.3f}")
