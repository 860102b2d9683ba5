"""Slow, obviously-correct reference implementations used as test oracles.

Everything here works on Python ints and '0'/'1' strings and shares no code
with the package beyond its public types.
"""

import math

import numpy as np


def gamma_str(n: int) -> str:
    b = bin(n)[2:]
    return "0" * (len(b) - 1) + b


def delta_str(n: int) -> str:
    b = bin(n)[2:]
    return gamma_str(len(b)) + b[1:]


def _code(n, code):
    return gamma_str(n) if code == "gamma" else delta_str(n)


def encode_oracle(q, code="gamma") -> str:
    """The client-side loop written out literally, with the trailing-zero rule."""
    q = [int(x) for x in q]
    out, i, d = [], 0, len(q)
    while i < d:
        r = 0
        while i + r < d and q[i + r] == 0:
            r += 1
        out.append(_code(r + 1, code))
        i += r
        if i >= d:
            break
        out.append("1" if q[i] < 0 else "0")
        out.append(_code(abs(q[i]), code))
        i += 1
    return "".join(out)


def _read(bits: str, pos: int, code: str):
    z = 0
    while bits[pos + z] == "0":
        z += 1
    v = int(bits[pos + z : pos + 2 * z + 1], 2)
    pos += 2 * z + 1
    if code == "delta":
        nb = v - 1
        v = int("1" + bits[pos : pos + nb], 2)
        pos += nb
    return v, pos


def decode_oracle(bits: str, d: int, code="gamma"):
    out, pos = [], 0
    while len(out) < d:
        run, pos = _read(bits, pos, code)
        out.extend([0] * (run - 1))
        if len(out) >= d:
            break
        sign = bits[pos]
        pos += 1
        mag, pos = _read(bits, pos, code)
        out.append(-mag if sign == "1" else mag)
    return out[:d], pos


def stochastic_round_oracle(u, step, uniforms):
    out = []
    for x, v in zip(u, uniforms):
        s = x / step
        lo = math.floor(s)
        out.append(lo + (1 if v < s - lo else 0))
    return out


def objective_oracle(u, delta, lam, uniforms, code="gamma"):
    q = stochastic_round_oracle(u, delta, uniforms)
    err = sum((x - delta * k) ** 2 for x, k in zip(u, q))
    return len(encode_oracle(q, code)) + lam * err


def vote_oracle(u, lam, grid, uniforms, code="gamma"):
    """Exhaustive argmin; ties resolved toward the larger step."""
    vals = [(objective_oracle(u, g, lam, uniforms, code), -g) for g in grid]
    best = min(vals)
    return -best[1]


def entropy_oracle(symbols) -> float:
    values, counts = np.unique(symbols, return_counts=True)
    n = sum(counts)
    return -sum(c / n * math.log2(c / n) for c in counts)


def hadamard_matrix(n: int) -> np.ndarray:
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h / math.sqrt(n)
