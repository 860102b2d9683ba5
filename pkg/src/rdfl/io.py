"""On-disk formats: float32 vector files and codec container files.

Vector file: 4-byte magic ``b"RDV1"``, u32 little-endian length ``n``, then
``n`` little-endian float32 values. Nothing may follow.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .codec import EncodedUpdate

VECTOR_MAGIC = b"RDV1"
_LEN = struct.Struct("<I")
PathLike = Union[str, Path]


class FileFormatError(ValueError):
    """Malformed file; ``byte_offset`` points at the first bad byte."""

    def __init__(self, message: str, byte_offset: int):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


def vector_to_bytes(values) -> bytes:
    v = np.asarray(values, dtype="<f4").reshape(-1)
    if v.size >= 2**32:
        raise ValueError("vector too long for a u32 length")
    return VECTOR_MAGIC + _LEN.pack(v.size) + v.tobytes()


def vector_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < 4 or data[:4] != VECTOR_MAGIC:
        raise FileFormatError(f"bad magic {data[:4]!r}, expected {VECTOR_MAGIC!r}", 0)
    if len(data) < 8:
        raise FileFormatError("truncated length field", len(data))
    (n,) = _LEN.unpack_from(data, 4)
    end = 8 + 4 * n
    if len(data) < end:
        # report the offset of the first missing value
        have = (len(data) - 8) // 4
        raise FileFormatError(f"expected {n} float32 values, found {have}", 8 + 4 * have)
    if len(data) > end:
        raise FileFormatError(f"{len(data) - end} trailing bytes after {n} values", end)
    values = np.frombuffer(data, dtype="<f4", count=n, offset=8).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise FileFormatError("non-finite value", 8 + 4 * int(bad[0]))
    return values


def read_vector(path: PathLike) -> np.ndarray:
    return vector_from_bytes(Path(path).read_bytes())


def write_vector(path: PathLike, values) -> None:
    Path(path).write_bytes(vector_to_bytes(values))


def read_container(path: PathLike) -> EncodedUpdate:
    return EncodedUpdate.from_bytes(Path(path).read_bytes())


def write_container(path: PathLike, encoded: EncodedUpdate) -> None:
    Path(path).write_bytes(encoded.to_bytes())
