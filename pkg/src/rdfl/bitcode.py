"""Bit strings, bit-level reader/writer and the Elias gamma and delta codes.

Bits are stored most-significant-first. ``gamma(n)`` for ``n >= 1`` is
``floor(log2 n)`` zeros followed by the binary digits of ``n``; ``delta(n)`` is
``gamma(floor(log2 n) + 1)`` followed by the low ``floor(log2 n)`` bits of ``n``.
"""

from __future__ import annotations

import struct
from typing import Iterable, Tuple, Union

import numpy as np

MAX_BITS = 62
MAX_VALUE = (1 << MAX_BITS) - 1


class BitstreamError(ValueError):
    """Bit stream that cannot be parsed."""

    def __init__(self, message: str, bit_offset: int | None = None):
        if bit_offset is not None:
            message = f"{message} (bit offset {bit_offset}, byte offset {bit_offset // 8})"
        super().__init__(message)
        self.bit_offset = bit_offset


class BitString:
    """Immutable sequence of bits backed by a ``uint8`` array of zeros and ones."""

    __slots__ = ("_bits",)

    def __init__(self, bits: Union[Iterable[int], np.ndarray, str] = ()):
        if isinstance(bits, str):
            if set(bits) - {"0", "1"}:
                raise ValueError("bit strings may only contain '0' and '1'")
            arr = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
        else:
            arr = np.asarray(bits if isinstance(bits, np.ndarray) else list(bits), dtype=np.uint8)
            if arr.size and arr.max() > 1:
                raise ValueError("bits must be 0 or 1")
        arr = np.array(arr, dtype=np.uint8).reshape(-1)
        arr.setflags(write=False)
        self._bits = arr

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "BitString":
        obj = cls.__new__(cls)
        arr = np.ascontiguousarray(arr, dtype=np.uint8)
        arr.setflags(write=False)
        obj._bits = arr
        return obj

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self) -> int:
        return self._bits.size

    def __add__(self, other: "BitString") -> "BitString":
        if not isinstance(other, BitString):
            return NotImplemented
        return BitString._wrap(np.concatenate([self._bits, other._bits]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash((len(self), self.to_bytes()))

    def __str__(self) -> str:
        return (self._bits + ord("0")).tobytes().decode("ascii")

    def __repr__(self) -> str:
        s = str(self)
        return f"BitString('{s if len(s) <= 64 else s[:61] + '...'}')"

    def startswith(self, prefix: "BitString") -> bool:
        n = len(prefix)
        return n <= len(self) and np.array_equal(self._bits[:n], prefix._bits)

    @staticmethod
    def concat(parts: Iterable["BitString"]) -> "BitString":
        arrays = [p._bits for p in parts]
        if not arrays:
            return BitString()
        return BitString._wrap(np.concatenate(arrays))

    def to_bytes(self) -> bytes:
        """Packed MSB-first; the last byte is zero-padded."""
        return np.packbits(self._bits).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, nbits: int | None = None) -> "BitString":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if nbits is not None:
            if nbits > bits.size:
                raise BitstreamError(f"need {nbits} bits but only {bits.size} available")
            bits = bits[:nbits]
        return cls._wrap(bits)

    def serialize(self) -> bytes:
        """Length in bits as little-endian u64, then the padded payload bytes."""
        return struct.pack("<Q", len(self)) + self.to_bytes()

    @classmethod
    def deserialize(cls, data: bytes) -> "BitString":
        if len(data) < 8:
            raise BitstreamError("missing bit-length prefix", 0)
        (nbits,) = struct.unpack_from("<Q", data)
        need = (nbits + 7) // 8
        if len(data) - 8 != need:
            raise BitstreamError(f"expected {need} payload bytes, found {len(data) - 8}", 64)
        return cls.from_bytes(data[8:], nbits)


class BitWriter:
    def __init__(self):
        self._chunks: list[str] = []

    def write_bit(self, bit: int) -> None:
        self._chunks.append("1" if bit else "0")

    def write_uint(self, value: int, width: int) -> None:
        if width == 0:
            return
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        self._chunks.append(format(value, f"0{width}b"))

    def write(self, bits: BitString) -> None:
        self._chunks.append(str(bits))

    def getvalue(self) -> BitString:
        return BitString("".join(self._chunks))


class BitReader:
    """Cursor over a :class:`BitString`; reading past the end raises."""

    def __init__(self, source: BitString, cursor: int = 0):
        if not 0 <= cursor <= len(source):
            raise ValueError("cursor out of range")
        self.source = source
        self.cursor = cursor
        self._bits = source.bits

    @property
    def remaining(self) -> int:
        return len(self.source) - self.cursor

    def read_bit(self) -> int:
        if self.cursor >= len(self.source):
            raise BitstreamError("unexpected end of stream", self.cursor)
        bit = int(self._bits[self.cursor])
        self.cursor += 1
        return bit

    def read_uint(self, width: int) -> int:
        if width > self.remaining:
            raise BitstreamError(f"truncated {width}-bit field", self.cursor)
        value = 0
        for b in self._bits[self.cursor : self.cursor + width]:
            value = (value << 1) | int(b)
        self.cursor += width
        return value

    def count_zeros(self, limit: int = MAX_BITS) -> int:
        """Consume zeros up to (not including) the next one bit."""
        start = self.cursor
        ones = np.flatnonzero(self._bits[start : start + limit + 1])
        if ones.size == 0:
            if len(self.source) - start <= limit:
                raise BitstreamError("unexpected end of stream in codeword prefix", start)
            raise BitstreamError(f"more than {limit} leading zeros", start)
        self.cursor = start + int(ones[0])
        return int(ones[0])


def _check_positive(n: int) -> int:
    n = int(n)
    if n < 1:
        raise ValueError(f"universal codes encode positive integers, got {n}")
    if n > MAX_VALUE:
        raise OverflowError(f"{n} exceeds the {MAX_BITS}-bit code limit")
    return n


def gamma_encode(n: int) -> BitString:
    n = _check_positive(n)
    return BitString("0" * (n.bit_length() - 1) + format(n, "b"))


def gamma_decode(r: BitReader) -> int:
    start = r.cursor
    zeros = r.count_zeros(MAX_BITS - 1)
    if zeros + 1 > r.remaining:
        raise BitstreamError("truncated gamma codeword", start)
    return r.read_uint(zeros + 1)


def delta_encode(n: int) -> BitString:
    n = _check_positive(n)
    nbits = n.bit_length() - 1
    low = format(n & ((1 << nbits) - 1), f"0{nbits}b") if nbits else ""
    return gamma_encode(nbits + 1) + BitString(low)


def delta_decode(r: BitReader) -> int:
    start = r.cursor
    nbits = gamma_decode(r) - 1
    if nbits > MAX_BITS - 1:
        raise BitstreamError("delta codeword exceeds the integer limit", start)
    if nbits > r.remaining:
        raise BitstreamError("truncated delta codeword", start)
    return (1 << nbits) | r.read_uint(nbits)


# Vectorized helpers used by the codecs.


def floor_log2(n: np.ndarray) -> np.ndarray:
    """Exact ``floor(log2 n)`` for positive int64 arrays."""
    x = np.asarray(n, dtype=np.int64).copy()
    if x.size and x.min() < 1:
        raise ValueError("floor_log2 needs positive integers")
    out = np.zeros(x.shape, dtype=np.int64)
    for shift in (32, 16, 8, 4, 2, 1):
        mask = x >= (1 << shift)
        out[mask] += shift
        x[mask] >>= shift
    return out


def gamma_lengths(n: np.ndarray) -> np.ndarray:
    return 2 * floor_log2(n) + 1


def delta_lengths(n: np.ndarray) -> np.ndarray:
    nbits = floor_log2(n)
    return gamma_lengths(nbits + 1) + nbits


def pack_tokens(values: np.ndarray, widths: np.ndarray) -> np.ndarray:
    """Concatenate ``values[i]`` written MSB-first in ``widths[i]`` bits (each <= 64)."""
    values = np.asarray(values, dtype=np.uint64).reshape(-1)
    widths = np.asarray(widths, dtype=np.int64).reshape(-1)
    total = int(widths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.uint8)
    owner = np.repeat(np.arange(widths.size), widths)
    starts = np.cumsum(widths) - widths
    shift = (widths[owner] - 1 - (np.arange(total) - starts[owner])).astype(np.uint64)
    return ((values[owner] >> shift) & np.uint64(1)).astype(np.uint8)


def gamma_tokens(n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(values, widths) of shape (len(n), 2): the zero prefix, then the binary part."""
    n = np.asarray(n, dtype=np.int64)
    nbits = floor_log2(n)
    values = np.stack([np.zeros_like(n), n], axis=-1)
    widths = np.stack([nbits, nbits + 1], axis=-1)
    return values, widths


def delta_tokens(n: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = np.asarray(n, dtype=np.int64)
    nbits = floor_log2(n)
    head_v, head_w = gamma_tokens(nbits + 1)
    low = n & ((np.int64(1) << nbits) - 1)
    return (
        np.concatenate([head_v, low[..., None]], axis=-1),
        np.concatenate([head_w, nbits[..., None]], axis=-1),
    )
