"""
Federated logistic regression with compressed uplinks
=====================================================

100 clients with power-law dataset sizes and skewed labels. Ten train per
round and send their updates through a compressor. We watch accuracy
against the bits sent upstream.
"""

# %%
from rdfl.baselines import BaselineConfig
from rdfl.fedsim import CodecConfig, FedConfig, TaskSpec, generate_task, run_training

data = generate_task(TaskSpec())
print("clients", len(data.clients), "sizes", data.sizes.min(), "to", data.sizes.max())

# %%
# Fewer rounds than the acceptance run, to keep this quick.
arms = {
    "float32": None,
    "top-k 10%": BaselineConfig("topk", topk_fraction=0.1),
    "ours step 0.2": CodecConfig(0.2),
    "ours step 1.0": CodecConfig(1.0),
    "ours step 5.0": CodecConfig(5.0),
}
for name, comp in arms.items():
    trace = run_training(data, FedConfig(rounds=100, compressor=comp))
    print(f"{name:<14} accuracy {trace.final_accuracy:.3f}   {trace.total_bits / 1e6:7.2f} Mbit   "
          f"{trace.mean_rate:6.3f} bits/elem   distortion {trace.mean_distortion:.2e}")

# %%
# The same run on four threads gives the same trace, byte for byte.
cfg = FedConfig(rounds=20, compressor=CodecConfig(1.0))
assert run_training(data, cfg).to_csv() == run_training(data, FedConfig(**{**cfg.__dict__, "workers": 4})).to_csv()
print("serial and threaded traces match")
