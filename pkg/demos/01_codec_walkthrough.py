"""
Encoding one client update by hand
==================================

A client update is quantized to integers, and runs of zeros and the
non-zero magnitudes are written with Elias codes. Every step is small
enough to print.
"""

# %%
# Start with a tiny integer vector. The payload alternates between a
# zero-run length (plus one, so it is a positive integer), a sign bit and
# a magnitude.
import numpy as np

from rdfl import decode_update, encode_update, make_rng, rate_of
from rdfl.bitcode import delta_encode, gamma_encode
from rdfl.codec import decode_symbols, encode_symbols

q = np.array([0, 0, 3, -1, 0])
bits = encode_symbols(q)
print("symbols        ", q)
print("gamma stream   ", bits)
print("decoded back   ", decode_symbols(bits, q.size))

# %%
# Gamma spends ``2*floor(log2 n) + 1`` bits on ``n``; delta grows more
# slowly and wins once magnitudes pass about 32.
for n in (1, 2, 5, 17, 100, 1000):
    print(f"{n:5d}  gamma {str(gamma_encode(n)):>20s}  delta {str(delta_encode(n)):>20s}")

# %%
# A real update: sparse and heavy-tailed. Stochastic rounding keeps the
# reconstruction unbiased, so the decoded vector scatters around the input.
rng = make_rng(0, "demo")
u = rng.standard_t(3, 2000) * 0.1
u[rng.random(2000) < 0.7] = 0.0

for step in (0.01, 0.05, 0.2):
    e = encode_update(u, step, make_rng(1, "encode"))
    err = decode_update(e) - u
    r = rate_of(e)
    print(f"step {step:<5}  {r.payload_bits_per_element:5.2f} bits/elem  "
          f"distortion {err @ err / u.size:.2e}  mean error {err.mean():+.1e}")

# %%
# The container is a 17-byte header (tag, length, step, seed) followed by
# the zero-padded payload bytes.
e = encode_update(u, 0.05, make_rng(1, "encode"))
blob = e.to_bytes()
print(len(blob), "bytes;", "header", blob[:17].hex())
