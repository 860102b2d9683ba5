"""Value types shared across the package, plus seeded RNG helpers and symbol statistics."""

from __future__ import annotations

import enum
import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

import numpy as np

Key = Union[int, str]


class Quantizer(enum.IntEnum):
    """Quantizer identities. The integer value is the on-wire quantizer_id."""

    ROUND = 0
    STOCHASTIC = 1
    DITHERED = 2
    NONE = 3
    TOPK = 4
    QSGD = 5
    DRIVE = 6
    TLC = 7

    @classmethod
    def parse(cls, value: Union[str, int, "Quantizer"]) -> "Quantizer":
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown quantizer {value!r}") from None
        return cls(value)


def _key_to_int(key: Key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be nonnegative")
        return int(key)
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed: int, *keys: Key) -> np.random.Generator:
    """Counter-based (Philox) generator for the stream ``(seed, *keys)``.

    Streams with different keys are statistically independent, and the same
    ``(seed, *keys)`` always yields the same sequence on every platform.
    String keys (e.g. client ids) are hashed to 64 bits.
    """
    ss = np.random.SeedSequence(
        entropy=_key_to_int(seed), spawn_key=tuple(_key_to_int(k) for k in keys)
    )
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *keys: Key) -> int:
    """A 64-bit integer seed for the stream ``(seed, *keys)``."""
    ss = np.random.SeedSequence(
        entropy=_key_to_int(seed), spawn_key=tuple(_key_to_int(k) for k in keys)
    )
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, eq=False)
class ClientUpdate:
    """A flattened weighted model delta ``weight * (theta_k - theta)``."""

    values: np.ndarray
    weight: float = 1.0
    client_id: Key = 0
    round: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise ValueError("update values must be finite")
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")
        if self.round < 0:
            raise ValueError("round must be nonnegative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def d(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class QuantizedUpdate:
    symbols: np.ndarray
    step: float
    quantizer: Quantizer = Quantizer.STOCHASTIC
    dither_seed: Optional[int] = None

    def __post_init__(self):
        symbols = np.asarray(self.symbols)
        if symbols.size and not np.issubdtype(symbols.dtype, np.integer):
            raise TypeError("symbols must be integers")
        symbols = symbols.astype(np.int64).reshape(-1)
        symbols.setflags(write=False)
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "quantizer", Quantizer.parse(self.quantizer))
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        has_seed = self.dither_seed is not None
        if has_seed != (self.quantizer is Quantizer.DITHERED):
            raise ValueError("dither_seed must be set exactly for dithered quantization")

    @property
    def d(self) -> int:
        return self.symbols.size


@dataclass(frozen=True)
class UpdateStats:
    sparsity: float
    entropy_bits: float
    histogram: Mapping[int, int] = field(default_factory=dict)


def entropy_from_counts(counts: Iterable[int]) -> float:
    """Plug-in Shannon entropy in bits of an empirical distribution."""
    c = np.asarray(list(counts) if not isinstance(counts, np.ndarray) else counts, dtype=np.float64)
    c = c[c > 0]
    if c.size == 0:
        raise ValueError("no distribution: empty counts")
    p = c / c.sum()
    return float(max(0.0, -np.sum(p * np.log2(p))))


def symbol_entropy(symbols: np.ndarray) -> float:
    _, counts = np.unique(np.asarray(symbols), return_counts=True)
    return entropy_from_counts(counts)


def update_stats(q: Union[QuantizedUpdate, np.ndarray]) -> UpdateStats:
    symbols = q.symbols if isinstance(q, QuantizedUpdate) else np.asarray(q)
    if symbols.size == 0:
        raise ValueError("cannot compute statistics of an empty update")
    values, counts = np.unique(symbols, return_counts=True)
    hist = {int(v): int(c) for v, c in zip(values, counts)}
    return UpdateStats(
        sparsity=float(np.count_nonzero(symbols == 0)) / symbols.size,
        entropy_bits=entropy_from_counts(counts),
        histogram=hist,
    )


def segment_stats(q: QuantizedUpdate, segments: Mapping[str, slice]) -> dict[str, UpdateStats]:
    """Per-segment statistics for named slices of the flat update (e.g. layers)."""
    return {name: update_stats(q.symbols[sl]) for name, sl in segments.items()}


def pooled_histogram(symbol_vectors: Iterable[np.ndarray]) -> Counter:
    """One histogram accumulated over every (round, client) symbol vector."""
    total: Counter = Counter()
    for s in symbol_vectors:
        values, counts = np.unique(np.asarray(s), return_counts=True)
        total.update({int(v): int(c) for v, c in zip(values, counts)})
    return total


def distortion(u: np.ndarray, u_hat: np.ndarray) -> float:
    """Squared Euclidean error ``||u - u_hat||^2``."""
    u = np.asarray(u, dtype=np.float64)
    u_hat = np.asarray(u_hat, dtype=np.float64)
    if u.shape != u_hat.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {u_hat.shape}")
    diff = u - u_hat
    return float(diff @ diff)
