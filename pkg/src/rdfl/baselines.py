"""Comparison compressors: Top-K, QSGD, DRIVE, stochastic 3LC and no compression.

Every method produces an :class:`~rdfl.codec.EncodedUpdate` in the same
container as the main codec, distinguished by its quantizer id, so rates are
measured the same way for all of them. Scalars (norms, scales, kept values) are
sent as 32-bit floats inside the payload.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bitcode import BitString, BitstreamError, pack_tokens
from .codec import Code, EncodedUpdate, as_f32, decode_symbols, decode_update, encode_symbols
from .quantize import stochastic_round
from .transforms import inverse_hadamard, randomized_hadamard
from .updates import Quantizer, make_rng

METHODS = ("topk", "qsgd", "drive", "tlc", "none")


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    topk_fraction: float = 0.1
    qsgd_levels: int = 16
    tlc_sparsity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown baseline {self.method!r}; expected one of {METHODS}")
        if self.method == "topk" and not 0 < self.topk_fraction <= 1:
            raise ValueError("topk_fraction must be in (0, 1]")
        if self.method == "qsgd" and self.qsgd_levels < 1:
            raise ValueError("qsgd_levels must be >= 1")
        if self.method == "tlc" and self.tlc_sparsity < 1:
            raise ValueError("tlc_sparsity must be >= 1")

    @property
    def label(self) -> str:
        param = {
            "topk": self.topk_fraction,
            "qsgd": self.qsgd_levels,
            "tlc": self.tlc_sparsity,
        }.get(self.method)
        return self.method if param is None else f"{self.method}:{param:g}"


def _f32_bits(x) -> np.ndarray:
    words = np.asarray(x, dtype=np.float32).reshape(-1).view(np.uint32)
    return pack_tokens(words, np.full(words.size, 32))


def _read_f32(bits: np.ndarray, pos: int, count: int) -> np.ndarray:
    end = pos + 32 * count
    if end > bits.size:
        raise BitstreamError(f"truncated float field ({count} values)", pos)
    chunk = bits[pos:end].reshape(count, 32)
    return np.packbits(chunk, axis=1).view(">f4").reshape(-1).astype(np.float64)


def _f32_ceil(x: float) -> float:
    """Smallest binary32 value >= x, so scaled inputs stay within [-1, 1]."""
    y = np.float32(x)
    if float(y) < x:
        y = np.nextafter(y, np.float32(np.inf))
    return float(y)


def _check_padding(bits: np.ndarray, pos: int) -> None:
    rest = bits[pos:]
    if rest.size >= 8 or rest.any():
        raise BitstreamError("trailing data after payload", pos)


# Top-K


def topk_count(d: int, fraction: float) -> int:
    return min(d, math.ceil(fraction * d - 1e-9))


def topk_encode(u, fraction: float) -> EncodedUpdate:
    """Keep the ``ceil(fraction * d)`` largest magnitudes (ties: lower index first)."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    k = topk_count(u.size, fraction)
    keep = np.sort(np.argsort(-np.abs(u), kind="stable")[:k])
    mask = np.zeros(u.size, dtype=np.uint8)
    mask[keep] = 1
    payload = np.concatenate([mask, _f32_bits(u[keep])])
    return EncodedUpdate(Quantizer.TOPK, Code.RAW, u.size, as_f32(fraction), BitString._wrap(payload))


def topk_decode(e: EncodedUpdate) -> np.ndarray:
    bits = e.payload.bits
    if bits.size < e.d:
        raise BitstreamError("truncated bitmask", bits.size)
    mask = bits[: e.d].astype(bool)
    k = int(mask.sum())
    out = np.zeros(e.d)
    out[mask] = _read_f32(bits, e.d, k)
    _check_padding(bits, e.d + 32 * k)
    return out


# QSGD


def qsgd_encode(u, levels: int, rng: np.random.Generator) -> EncodedUpdate:
    """Norm-scaled stochastic quantization to ``levels`` levels, coded like the main codec."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(u))
    step = as_f32(levels)
    if norm == 0.0:
        return EncodedUpdate(Quantizer.QSGD, Code.GAMMA, u.size, step, BitString())
    norm32 = _f32_ceil(norm)
    ell = stochastic_round(np.abs(u) / norm32 * levels, 1.0, rng)
    symbols = np.where(u < 0, -ell, ell)
    payload = np.concatenate([_f32_bits(norm32), encode_symbols(symbols).bits])
    return EncodedUpdate(Quantizer.QSGD, Code.GAMMA, u.size, step, BitString._wrap(payload))


def qsgd_decode(e: EncodedUpdate) -> np.ndarray:
    bits = e.payload.bits
    if bits.size < 8 and not bits.any():
        return np.zeros(e.d)
    norm = _read_f32(bits, 0, 1)[0]
    symbols = decode_symbols(BitString._wrap(bits[32:]), e.d, e.code)
    return norm * symbols / e.step


# DRIVE


def drive_scale(y: np.ndarray) -> float:
    """The scale minimizing ``||y - S sign(y)||^2``: mean absolute value."""
    y = np.asarray(y, dtype=np.float64)
    return float(np.abs(y).mean()) if y.size else 0.0


def drive_signs(y: np.ndarray) -> np.ndarray:
    """±1 signs with sign(0) = +1."""
    return np.where(np.asarray(y) < 0, -1.0, 1.0)


def drive_encode(u, seed: int) -> EncodedUpdate:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    y = randomized_hadamard(u, seed)
    payload = np.concatenate([_f32_bits(drive_scale(y)), (y < 0).astype(np.uint8)])
    return EncodedUpdate(Quantizer.DRIVE, Code.RAW, u.size, 1.0, BitString._wrap(payload), dither_seed=seed)


def drive_decode(e: EncodedUpdate) -> np.ndarray:
    bits = e.payload.bits
    n = 1 if e.d <= 1 else 1 << (e.d - 1).bit_length()
    scale = _read_f32(bits, 0, 1)[0]
    if bits.size < 32 + n:
        raise BitstreamError("truncated sign bits", bits.size)
    signs = 1.0 - 2.0 * bits[32 : 32 + n]
    _check_padding(bits, 32 + n)
    return inverse_hadamard(scale * signs, e.dither_seed, e.d)


# 3LC (stochastic variant)


def pack_trits(t) -> bytes:
    """Five trits per byte: ``sum((t_j + 1) * 3**j)``, last group zero-trit padded."""
    t = np.asarray(t, dtype=np.int64).reshape(-1)
    if t.size and (t.min() < -1 or t.max() > 1):
        raise ValueError("trits must be in {-1, 0, 1}")
    groups = np.ones(5 * math.ceil(t.size / 5), dtype=np.int64)
    groups[: t.size] = t + 1
    return (groups.reshape(-1, 5) @ (3 ** np.arange(5))).astype(np.uint8).tobytes()


def unpack_trits(data: bytes, n: int) -> np.ndarray:
    values = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
    if values.size and values.max() > 242:
        raise ValueError("byte value out of trit range")
    digits = (values[:, None] // (3 ** np.arange(5))) % 3
    return (digits.reshape(-1) - 1)[:n]


def tlc_packed_bits(d: int) -> int:
    """Size of the fixed-length alternative: scale plus 8 bits per five trits."""
    return 32 + 8 * math.ceil(d / 5)


def tlc_encode(u, sparsity: float, rng: np.random.Generator) -> EncodedUpdate:
    """Stochastic three-level quantization to ``{-M, 0, M}``, ``M = sparsity * max|u|``."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    peak = float(np.max(np.abs(u))) if u.size else 0.0
    scale = _f32_ceil(sparsity * peak)
    if scale == 0.0:
        trits = np.zeros(u.size, dtype=np.int64)
    else:
        trits = np.clip(stochastic_round(np.clip(u / scale, -1.0, 1.0), 1.0, rng), -1, 1)
    payload = np.concatenate([_f32_bits(scale), encode_symbols(trits).bits])
    return EncodedUpdate(Quantizer.TLC, Code.GAMMA, u.size, as_f32(sparsity), BitString._wrap(payload))


def tlc_decode(e: EncodedUpdate) -> np.ndarray:
    bits = e.payload.bits
    scale = _read_f32(bits, 0, 1)[0]
    trits = decode_symbols(BitString._wrap(bits[32:]), e.d, e.code)
    if trits.size and np.abs(trits).max() > 1:
        raise BitstreamError("3LC payload holds a non-trit symbol", 32)
    return scale * trits


# No compression


def no_compression(u) -> EncodedUpdate:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    return EncodedUpdate(Quantizer.NONE, Code.RAW, u.size, 1.0, BitString._wrap(_f32_bits(u)))


def none_decode(e: EncodedUpdate) -> np.ndarray:
    bits = e.payload.bits
    out = _read_f32(bits, 0, e.d)
    _check_padding(bits, 32 * e.d)
    return out


# Dispatch


def baseline_encode(u, config: BaselineConfig, rng: Optional[np.random.Generator] = None) -> EncodedUpdate:
    if config.method in ("qsgd", "tlc") and rng is None:
        rng = make_rng(config.seed, config.method)
    if config.method == "topk":
        return topk_encode(u, config.topk_fraction)
    if config.method == "qsgd":
        return qsgd_encode(u, config.qsgd_levels, rng)
    if config.method == "drive":
        return drive_encode(u, config.seed)
    if config.method == "tlc":
        return tlc_encode(u, config.tlc_sparsity, rng)
    return no_compression(u)


_DECODERS = {
    Quantizer.TOPK: topk_decode,
    Quantizer.QSGD: qsgd_decode,
    Quantizer.DRIVE: drive_decode,
    Quantizer.TLC: tlc_decode,
    Quantizer.NONE: none_decode,
}


def decode_any(e: EncodedUpdate) -> np.ndarray:
    """Decode a container from the main codec or any baseline."""
    return _DECODERS.get(e.quantizer, decode_update)(e)
