"""Random-rotation and per-client normalization ablations of the main codec."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .codec import Code, payload_length
from .quantize import stochastic_round_with
from .rd import update_rng
from .transforms import inverse_hadamard, next_pow2, normalize, randomized_hadamard
from .updates import ClientUpdate, derive_seed, symbol_entropy

NORM_BITS = 32


@dataclass(frozen=True)
class RotationRow:
    delta: float
    entropy: float
    entropy_rotated: float
    distortion: float
    distortion_rotated: float
    rate: float
    rate_rotated: float


def rotation_ablation(
    updates: Sequence[ClientUpdate],
    grid: Sequence[float],
    seed: int,
    rotation_seed: int = 0,
    per_client: bool = False,
    code: Code | str = Code.GAMMA,
) -> list[RotationRow]:
    """Quantize each update as-is and after a randomized Hadamard rotation.

    Entropy is per symbol and ignores the zero-padded coordinates of the rotated
    vector; rate counts every transmitted coordinate, padding included;
    distortion is measured in the original coordinates. All three are averaged
    over updates (rate and distortion per original element). With
    ``per_client=False`` one fixed rotation is used for every client.
    """
    rows = {float(g): np.zeros(6) for g in grid}
    for up in updates:
        u = up.values
        d = u.size
        rseed = derive_seed(rotation_seed, "client", up.round, up.client_id) if per_client else rotation_seed
        y = randomized_hadamard(u, rseed)
        rng = update_rng(seed, up)
        uni, uni_rot = rng.random(d), rng.random(next_pow2(d))
        for delta, acc in rows.items():
            q = stochastic_round_with(u, delta, uni)
            qr = stochastic_round_with(y, delta, uni_rot)
            u_rot_hat = inverse_hadamard(delta * qr, rseed, d)
            err, err_rot = u - delta * q, u - u_rot_hat
            acc += [
                symbol_entropy(q),
                symbol_entropy(qr[:d]),
                err @ err / d,
                err_rot @ err_rot / d,
                payload_length(q, code) / d,
                payload_length(qr, code) / d,
            ]
    n = len(updates)
    return [RotationRow(delta, *(float(x) for x in acc / n)) for delta, acc in sorted(rows.items())]


@dataclass(frozen=True)
class SchemePoint:
    """Totals over all updates: payload bits, squared error, element count."""

    step: float
    bits: int
    distortion: float
    elements: int

    @property
    def rate(self) -> float:
        return self.bits / self.elements

    @property
    def distortion_per_element(self) -> float:
        return self.distortion / self.elements


def fixed_step_point(updates: Sequence[ClientUpdate], delta: float, seed: int, code: Code | str = Code.GAMMA) -> SchemePoint:
    """Every client quantizes with the same global step."""
    bits, dist, n = 0, 0.0, 0
    for up in updates:
        u = up.values
        q = stochastic_round_with(u, delta, update_rng(seed, up).random(u.size))
        err = u - delta * q
        bits += payload_length(q, code)
        dist += float(err @ err)
        n += u.size
    return SchemePoint(delta, bits, dist, n)


def normalized_point(
    updates: Sequence[ClientUpdate], unit_step: float, seed: int, code: Code | str = Code.GAMMA
) -> SchemePoint:
    """Every client quantizes ``u/||u||`` with ``unit_step`` and sends its norm (32 bits).

    Equivalent to a per-client step ``unit_step * ||u||``.
    """
    bits, dist, n = 0, 0.0, 0
    for up in updates:
        unit, norm = normalize(up.values)
        q = stochastic_round_with(unit, unit_step, update_rng(seed, up).random(unit.size))
        err = up.values - norm * unit_step * q
        bits += payload_length(q, code) + NORM_BITS
        dist += float(err @ err)
        n += unit.size
    return SchemePoint(unit_step, bits, dist, n)


def match_normalized_rate(
    updates: Sequence[ClientUpdate],
    target_bits: int,
    seed: int,
    rel_tol: float = 0.05,
    initial: Optional[float] = None,
    code: Code | str = Code.GAMMA,
    max_iter: int = 200,
) -> SchemePoint:
    """Bisect (in log space) for the unit step whose total rate is closest to ``target_bits``.

    The rate is nonincreasing in the step because the draws are shared, so
    bisection converges; the closest point found is returned even if it misses
    ``rel_tol``.
    """
    if initial is None:
        norms = [np.linalg.norm(up.values) for up in updates]
        initial = 1.0 / max(float(np.mean(norms)), 1e-300)
    cache: dict[float, SchemePoint] = {}

    def at(log_step: float) -> SchemePoint:
        if log_step not in cache:
            cache[log_step] = normalized_point(updates, math.exp(log_step), seed, code)
        return cache[log_step]

    # Finer steps cost more bits: bracket so that bits(lo) >= target >= bits(hi).
    lo = hi = math.log(initial)
    for _ in range(max_iter):
        if at(lo).bits >= target_bits:
            break
        lo -= 2.0
    for _ in range(max_iter):
        if at(hi).bits <= target_bits:
            break
        hi += 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p = at(mid)
        if abs(p.bits / target_bits - 1) <= rel_tol / 4 or hi - lo < 1e-9:
            break
        if p.bits > target_bits:
            lo = mid
        else:
            hi = mid
    return min(cache.values(), key=lambda p: abs(p.bits - target_bits))


@dataclass(frozen=True)
class NormalizationComparison:
    fixed: SchemePoint
    normalized: SchemePoint

    @property
    def rate_mismatch(self) -> float:
        return abs(self.normalized.bits / self.fixed.bits - 1)


def normalization_ablation(
    updates: Sequence[ClientUpdate], delta: float, seed: int, rel_tol: float = 0.05, code: Code | str = Code.GAMMA
) -> NormalizationComparison:
    """Fixed global step vs. per-client normalization at (approximately) equal total rate."""
    fixed = fixed_step_point(updates, delta, seed, code)
    norms = [float(np.linalg.norm(up.values)) for up in updates]
    initial = delta / max(float(np.median(norms)), 1e-300)
    normalized = match_normalized_rate(updates, fixed.bits, seed, rel_tol, initial, code)
    return NormalizationComparison(fixed, normalized)
