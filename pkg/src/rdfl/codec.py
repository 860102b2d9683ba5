"""Stateless client-update codec: stochastic rounding, sign bits, universal-coded
magnitudes and universal-coded zero runs, in a fixed 17-byte container.

Stream layout for symbols ``q`` of length ``d``: for every non-zero ``q[i]``,
``code(r + 1)`` where ``r`` is the number of zeros since the previous non-zero,
then a sign bit (0 = positive, 1 = negative), then ``code(|q[i]|)``. If the
vector ends in zeros, one final ``code(r + 1)`` covers them and the stream stops;
the decoder stops once it has produced ``d`` symbols.

Container header (little-endian, 17 bytes)::

    u8   (format_version << 6) | (quantizer_id << 2) | code_id
    u32  d
    f32  step
    u64  dither_seed (0 when unused)

followed by the payload bits, MSB-first, zero-padded to a whole byte.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .bitcode import (
    MAX_VALUE,
    BitString,
    BitstreamError,
    delta_lengths,
    delta_tokens,
    gamma_lengths,
    gamma_tokens,
    pack_tokens,
)
from .quantize import dequantize, quantize
from .updates import QuantizedUpdate, Quantizer, entropy_from_counts, symbol_entropy

FORMAT_VERSION = 1
HEADER = struct.Struct("<BIfQ")
HEADER_BYTES = HEADER.size
HEADER_BITS = 8 * HEADER_BYTES


class Code(enum.IntEnum):
    GAMMA = 0
    DELTA = 1
    RAW = 2  # fixed-width fields, used by the baselines

    @classmethod
    def parse(cls, value: Union[str, int, "Code"]) -> "Code":
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown code {value!r}") from None
        return cls(value)


def as_f32(x: float) -> float:
    """``x`` rounded to the nearest binary32 value (what the header carries)."""
    return float(np.float32(x))


@dataclass(frozen=True, eq=False)
class EncodedUpdate:
    quantizer: Quantizer
    code: Code
    d: int
    step: float
    payload: BitString
    dither_seed: int = 0
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "quantizer", Quantizer.parse(self.quantizer))
        object.__setattr__(self, "code", Code.parse(self.code))
        if not 0 <= self.d < 2**32:
            raise ValueError("d must fit in 32 bits")
        if not 0 <= self.dither_seed < 2**64:
            raise ValueError("dither_seed must fit in 64 bits")
        if not 0 <= self.format_version < 4:
            raise ValueError("format_version must fit in 2 bits")
        if as_f32(self.step) != self.step:
            raise ValueError("step must be exactly representable as binary32")

    def header_bytes(self) -> bytes:
        tag = (self.format_version << 6) | (int(self.quantizer) << 2) | int(self.code)
        return HEADER.pack(tag, self.d, self.step, self.dither_seed)

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.payload.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "EncodedUpdate":
        if len(data) < HEADER_BYTES:
            raise BitstreamError(f"container shorter than the {HEADER_BYTES}-byte header", 8 * len(data))
        tag, d, step, seed = HEADER.unpack_from(data)
        version, qid, cid = tag >> 6, (tag >> 2) & 0xF, tag & 0x3
        if version != FORMAT_VERSION:
            raise BitstreamError(f"unsupported format version {version}", 0)
        try:
            quantizer, code = Quantizer(qid), Code(cid)
        except ValueError:
            raise BitstreamError(f"unknown quantizer/code id {qid}/{cid}", 0) from None
        if not (math.isfinite(step) and step > 0):
            raise BitstreamError(f"invalid step {step}", 8 * 5)
        return cls(quantizer, code, d, step, BitString.from_bytes(data[HEADER_BYTES:]), seed, version)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EncodedUpdate):
            return NotImplemented
        return self.header_bytes() == other.header_bytes() and self.payload == other.payload


@dataclass(frozen=True)
class RateReport:
    payload_bits: int
    header_bits: int
    d: int

    @property
    def total_bits(self) -> int:
        return self.payload_bits + self.header_bits

    @property
    def bits_per_element(self) -> float:
        return self.total_bits / self.d if self.d else math.inf

    @property
    def payload_bits_per_element(self) -> float:
        return self.payload_bits / self.d if self.d else 0.0


# Lossless stage.


def _code_tokens(n: np.ndarray, code: Code):
    return gamma_tokens(n) if code is Code.GAMMA else delta_tokens(n)


def _code_lengths(n: np.ndarray, code: Code) -> np.ndarray:
    return gamma_lengths(n) if code is Code.GAMMA else delta_lengths(n)


def _runs(q: np.ndarray):
    nz = np.flatnonzero(q)
    runs = np.diff(nz, prepend=-1) - 1
    tail = q.size - 1 - nz[-1] if nz.size else q.size
    return nz, runs, int(tail)


def _check_symbols(q) -> np.ndarray:
    q = np.asarray(q)
    if q.size and not np.issubdtype(q.dtype, np.integer):
        raise TypeError("symbols must be integers")
    q = q.astype(np.int64).reshape(-1)
    if q.size and (q.min() < -MAX_VALUE or q.max() > MAX_VALUE):
        raise OverflowError("symbol magnitude exceeds the 62-bit code limit")
    return q


def encode_symbols(q, code: Code | str = Code.GAMMA) -> BitString:
    """Run-length + universal-code an integer vector (the lossless stage)."""
    code = Code.parse(code)
    q = _check_symbols(q)
    if q.size == 0:
        return BitString()
    nz, runs, tail = _runs(q)
    run_v, run_w = _code_tokens(runs + 1, code)
    mag_v, mag_w = _code_tokens(np.abs(q[nz]), code)
    sign = (q[nz] < 0).astype(np.int64)[:, None]
    values = np.concatenate([run_v, sign, mag_v], axis=1).ravel()
    widths = np.concatenate([run_w, np.ones_like(sign), mag_w], axis=1).ravel()
    if tail:
        tv, tw = _code_tokens(np.array([tail + 1]), code)
        values = np.concatenate([values, tv.ravel()])
        widths = np.concatenate([widths, tw.ravel()])
    return BitString._wrap(pack_tokens(values, widths))


def payload_length(q, code: Code | str = Code.GAMMA) -> int:
    """Length in bits of :func:`encode_symbols` without materialising the bits."""
    code = Code.parse(code)
    q = _check_symbols(q)
    if q.size == 0:
        return 0
    nz, runs, tail = _runs(q)
    bits = int(_code_lengths(runs + 1, code).sum() + nz.size + _code_lengths(np.abs(q[nz]), code).sum())
    if tail:
        bits += int(_code_lengths(np.array([tail + 1]), code)[0])
    return bits


_STATUS = {
    _kernels.TRUNCATED: "payload exhausted before all symbols were decoded",
    _kernels.TOO_LONG: "codeword exceeds the 62-bit integer limit",
    _kernels.RUN_OVERFLOW: "zero run extends past the declared length",
}


def decode_symbols(payload: BitString, d: int, code: Code | str = Code.GAMMA) -> np.ndarray:
    """Inverse of :func:`encode_symbols`. Up to 7 trailing zero padding bits are accepted."""
    code = Code.parse(code)
    if code is Code.RAW:
        raise ValueError("raw payloads are not run-length coded")
    bits = payload.bits
    if d == 0:
        out, pos = np.zeros(0, dtype=np.int64), 0
    else:
        out, pos, status, where = _kernels.decode_runs(bits, int(d), code is Code.DELTA)
        if status:
            raise BitstreamError(_STATUS[status], int(where))
    rest = bits[pos:]
    if rest.size >= 8 or rest.any():
        raise BitstreamError("symbols remaining after the declared length", int(pos))
    return out


# Full codec.


def _step32(step: float) -> float:
    s = as_f32(step)
    if not (s > 0 and math.isfinite(s)):
        raise ValueError(f"step {step} is not a positive binary32 value")
    return s


def encode_quantized(q: QuantizedUpdate, code: Code | str = Code.GAMMA) -> EncodedUpdate:
    step = _step32(q.step)
    if step != q.step:
        raise ValueError("quantized step must be binary32-exact; quantize with as_f32(step)")
    code = Code.parse(code)
    return EncodedUpdate(
        quantizer=q.quantizer,
        code=code,
        d=q.d,
        step=step,
        payload=encode_symbols(q.symbols, code),
        dither_seed=q.dither_seed or 0,
    )


def encode_update(
    u,
    step: float,
    rng: Optional[np.random.Generator] = None,
    code: Code | str = Code.GAMMA,
    quantizer: Quantizer | str = Quantizer.STOCHASTIC,
    dither_seed: Optional[int] = None,
) -> EncodedUpdate:
    """Quantize ``u`` with step ``step`` (rounded to binary32) and entropy-code it."""
    q = quantize(u, _step32(step), quantizer, rng=rng, dither_seed=dither_seed)
    return encode_quantized(q, code)


def decode_quantized(e: EncodedUpdate) -> QuantizedUpdate:
    if e.quantizer not in (Quantizer.ROUND, Quantizer.STOCHASTIC, Quantizer.DITHERED):
        raise ValueError(f"{e.quantizer.name} containers are decoded by rdfl.baselines")
    symbols = decode_symbols(e.payload, e.d, e.code)
    seed = e.dither_seed if e.quantizer is Quantizer.DITHERED else None
    return QuantizedUpdate(symbols, e.step, e.quantizer, seed)


def decode_update(e: EncodedUpdate) -> np.ndarray:
    return dequantize(decode_quantized(e))


def rate_of(e: EncodedUpdate) -> RateReport:
    """Bit accounting. Containers read back from bytes include their padding bits."""
    return RateReport(payload_bits=len(e.payload), header_bits=HEADER_BITS, d=e.d)


def coding_overhead(q: Union[QuantizedUpdate, np.ndarray], code: Code | str = Code.GAMMA) -> float:
    """Mean codeword length of the non-zero magnitudes over their empirical entropy.

    Returns ``inf`` for a single-symbol source (zero entropy).
    """
    symbols = q.symbols if isinstance(q, QuantizedUpdate) else np.asarray(q)
    mags = np.abs(symbols[symbols != 0]).astype(np.int64)
    if mags.size == 0:
        raise ValueError("coding overhead needs at least one non-zero symbol")
    mean_len = float(_code_lengths(mags, Code.parse(code)).mean())
    _, counts = np.unique(mags, return_counts=True)
    h = entropy_from_counts(counts)
    return mean_len / h if h > 0 else math.inf


def stream_overhead(q: Union[QuantizedUpdate, np.ndarray], code: Code | str = Code.GAMMA) -> float:
    """Payload bits over ``d`` times the empirical entropy of the whole symbol stream."""
    symbols = q.symbols if isinstance(q, QuantizedUpdate) else np.asarray(q)
    h = symbol_entropy(symbols) * symbols.size
    return payload_length(symbols, code) / h if h > 0 else math.inf
