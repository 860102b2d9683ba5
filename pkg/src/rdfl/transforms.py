"""Randomized Hadamard rotation and norm normalization."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .updates import make_rng


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def hadamard(x: np.ndarray) -> np.ndarray:
    """Orthonormal fast Walsh-Hadamard transform (Sylvester order). Self-inverse."""
    y = np.array(x, dtype=np.float64).reshape(-1)
    n = y.size
    if n & (n - 1) or n == 0:
        raise ValueError(f"length must be a power of two, got {n}")
    h = 1
    while h < n:
        y = y.reshape(-1, 2, h)
        y = np.stack((y[:, 0] + y[:, 1], y[:, 0] - y[:, 1]), axis=1).reshape(n)
        h *= 2
    return y / np.sqrt(n)


def random_signs(seed: Optional[int], n: int) -> np.ndarray:
    """The ±1 diagonal for ``seed``; ``None`` gives the identity."""
    if seed is None:
        return np.ones(n)
    return 1.0 - 2.0 * make_rng(seed, "rotation").integers(0, 2, n)


def randomized_hadamard(u, seed: Optional[int]) -> np.ndarray:
    """``H D u`` with ``u`` zero-padded to the next power of two."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    n = next_pow2(u.size)
    padded = np.zeros(n)
    padded[: u.size] = u
    return hadamard(random_signs(seed, n) * padded)


def inverse_hadamard(y, seed: Optional[int], original_d: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != next_pow2(original_d):
        raise ValueError(
            f"rotated length {y.size} does not match padded length {next_pow2(original_d)} of d={original_d}"
        )
    return (random_signs(seed, y.size) * hadamard(y))[:original_d]


def normalize(u) -> Tuple[np.ndarray, float]:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        return np.zeros_like(u), 0.0
    return u / norm, norm


def descale(unit, norm: float) -> np.ndarray:
    return np.asarray(unit, dtype=np.float64) * norm
