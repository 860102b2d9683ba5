"""Uniform scalar quantizers mapping reals to integer multiples of a step."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .updates import QuantizedUpdate, Quantizer, make_rng

_INT_LIMIT = 2.0**63


def _scaled(u, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError(f"step must be positive, got {step}")
    x = np.asarray(u, dtype=np.float64).reshape(-1) / step
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    if x.size and np.max(np.abs(x)) >= _INT_LIMIT - 1:
        raise OverflowError("|u|/step does not fit in a 64-bit integer")
    return x


def round_uniform(u, step: float) -> np.ndarray:
    """Nearest integer to ``u/step``, ties to even."""
    return np.rint(_scaled(u, step)).astype(np.int64)


def stochastic_round_with(u, step: float, uniforms: np.ndarray) -> np.ndarray:
    """Stochastic rounding driven by caller-supplied U[0, 1) draws.

    Rounds up with probability ``frac(u/step)``; equivalently
    ``floor(u/step - U) + 1``, which is monotone in ``u`` for a fixed draw.
    """
    x = _scaled(u, step)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    if uniforms.shape != x.shape:
        raise ValueError("need exactly one uniform draw per coordinate")
    lo = np.floor(x)
    return (lo + (uniforms < (x - lo))).astype(np.int64)


def stochastic_round(u, step: float, rng: np.random.Generator) -> np.ndarray:
    """Unbiased randomized rounding of ``u/step`` to a neighbouring integer.

    Consumes exactly ``len(u)`` doubles from ``rng``, so two generators in the
    same state produce the same symbols.
    """
    x = _scaled(u, step)
    return stochastic_round_with(u, step, rng.random(x.size))


def dither_noise(seed: int, d: int) -> np.ndarray:
    """Shared dither ``z ~ U(-0.5, 0.5)``; coordinate ``i`` is the i-th draw of the seeded stream."""
    return make_rng(seed, "dither").random(d) - 0.5


def dither_round(u, step: float, z: np.ndarray) -> np.ndarray:
    x = _scaled(u, step)
    z = np.asarray(z, dtype=np.float64)
    if z.shape != x.shape:
        raise ValueError("dither length must match input")
    return np.rint(x - z).astype(np.int64)


def dither_reconstruct(symbols: np.ndarray, step: float, z: np.ndarray) -> np.ndarray:
    return step * (np.asarray(symbols, dtype=np.float64) + z)


def dithered_quantize(u, step: float, seed: int) -> QuantizedUpdate:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    z = dither_noise(seed, u.size)
    return QuantizedUpdate(dither_round(u, step, z), step, Quantizer.DITHERED, int(seed))


def quantize(
    u,
    step: float,
    quantizer: Quantizer | str = Quantizer.STOCHASTIC,
    rng: Optional[np.random.Generator] = None,
    dither_seed: Optional[int] = None,
) -> QuantizedUpdate:
    """Dispatch to one of the three uniform quantizers."""
    quantizer = Quantizer.parse(quantizer)
    if quantizer is Quantizer.ROUND:
        return QuantizedUpdate(round_uniform(u, step), step, quantizer)
    if quantizer is Quantizer.STOCHASTIC:
        if rng is None:
            raise ValueError("stochastic rounding needs an rng")
        return QuantizedUpdate(stochastic_round(u, step, rng), step, quantizer)
    if quantizer is Quantizer.DITHERED:
        if dither_seed is None:
            if rng is None:
                raise ValueError("dithered quantization needs a seed or an rng")
            dither_seed = int(rng.integers(0, 2**63))
        return dithered_quantize(u, step, dither_seed)
    raise ValueError(f"{quantizer.name} is not a uniform quantizer")


def dequantize(q: QuantizedUpdate) -> np.ndarray:
    symbols = q.symbols.astype(np.float64)
    if q.quantizer is Quantizer.DITHERED:
        if q.dither_seed is None:
            raise ValueError("dithered update is missing its seed")
        return dither_reconstruct(symbols, q.step, dither_noise(q.dither_seed, symbols.size))
    return q.step * symbols
