"""Rate-distortion control built on the per-client Lagrangian.

All rates here are payload bits (headers excluded). Each update is quantized
with one set of uniform draws that is reused for every candidate step, so
comparisons across steps see common randomness and results are reproducible.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO

import numpy as np

from .codec import Code, payload_length
from .quantize import stochastic_round_with
from .updates import ClientUpdate, make_rng, symbol_entropy

# Step sizes spanning 0.05 .. 17.5, roughly log-spaced.
DEFAULT_GRID = (0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.5, 3.5, 5.0, 7.5, 10.0, 12.5, 17.5)


class InfeasibleBudget(ValueError):
    pass


@dataclass(frozen=True)
class RDPoint:
    delta: float
    mean_rate: float
    mean_distortion: float
    mean_entropy: float


@dataclass(frozen=True)
class LagrangeSetting:
    lam: float
    delta_grid: tuple

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        grid = tuple(float(g) for g in self.delta_grid)
        if not grid or any(g <= 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("delta_grid must be nonempty, positive and strictly increasing")
        object.__setattr__(self, "delta_grid", grid)


def _evaluate(u: np.ndarray, delta: float, uniforms: np.ndarray, code) -> tuple[int, float, np.ndarray]:
    q = stochastic_round_with(u, delta, uniforms)
    err = u - delta * q
    return payload_length(q, code), float(err @ err), q


def client_objective(u, delta: float, lam: float, rng: np.random.Generator, code: Code | str = Code.GAMMA) -> float:
    """``payload_bits + lam * squared_error`` for one stochastic-rounding draw."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    bits, err, _ = _evaluate(u, delta, rng.random(u.size), code)
    return bits + lam * err


def client_vote(u, lam: float, grid: Sequence[float], rng: np.random.Generator, code: Code | str = Code.GAMMA) -> float:
    """The grid step minimizing :func:`client_objective`; ties go to the larger step.

    Draws one uniform per coordinate from ``rng`` and reuses it for every step,
    i.e. each candidate sees the draw a fresh copy of ``rng`` would give
    :func:`client_objective`.
    """
    if len(grid) == 0:
        raise ValueError("empty grid")
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    uniforms = rng.random(u.size)
    best, best_val = None, np.inf
    for delta in sorted(grid):
        bits, err, _ = _evaluate(u, delta, uniforms, code)
        val = bits + lam * err
        if val <= best_val:
            best, best_val = delta, val
    return best


def update_rng(seed: int, update: ClientUpdate) -> np.random.Generator:
    return make_rng(seed, "rd", update.round, update.client_id)


def vote_histogram(
    updates: Sequence[ClientUpdate], lam: float, grid: Sequence[float], seed: int, code: Code | str = Code.GAMMA
) -> dict[float, int]:
    """Vote counts for every grid step, in grid order."""
    if not updates:
        raise ValueError("no updates")
    counts = {float(g): 0 for g in sorted(grid)}
    for up in updates:
        counts[client_vote(up.values, lam, grid, update_rng(seed, up), code)] += 1
    return counts


def modal_fraction(histogram: dict) -> float:
    total = sum(histogram.values())
    return max(histogram.values()) / total if total else 0.0


def vote_mode(histogram: dict) -> float:
    """Most voted step; ties go to the larger step."""
    top = max(histogram.values())
    return max(k for k, v in histogram.items() if v == top)


def rd_sweep(
    updates: Sequence[ClientUpdate], grid: Sequence[float], seed: int, code: Code | str = Code.GAMMA
) -> list[RDPoint]:
    """Mean per-element rate and distortion at each step, with the mean symbol entropy."""
    if not updates:
        raise ValueError("no updates")
    grid = sorted(float(g) for g in grid)
    rate = np.zeros(len(grid))
    dist = np.zeros(len(grid))
    ent = np.zeros(len(grid))
    for up in updates:
        u = up.values
        if u.size == 0:
            raise ValueError("empty update")
        uniforms = update_rng(seed, up).random(u.size)
        for j, delta in enumerate(grid):
            bits, err, q = _evaluate(u, delta, uniforms, code)
            rate[j] += bits / u.size
            dist[j] += err / u.size
            ent[j] += symbol_entropy(q)
    n = len(updates)
    return [RDPoint(g, float(r / n), float(dd / n), float(e / n)) for g, r, dd, e in zip(grid, rate, dist, ent)]


def select_delta_for_budget(curve: Sequence[RDPoint], budget_bits_per_element: float) -> float:
    """Smallest step whose mean rate fits the budget."""
    if not curve:
        raise ValueError("empty curve")
    ok = [p.delta for p in curve if p.mean_rate <= budget_bits_per_element]
    if not ok:
        coarsest = max(curve, key=lambda p: p.delta)
        raise InfeasibleBudget(
            f"budget {budget_bits_per_element:g} bits/element is below the coarsest rate "
            f"{coarsest.mean_rate:g} (delta={coarsest.delta:g})"
        )
    return min(ok)


def lambda_for_delta(delta: float) -> float:
    """High-rate approximation of the multiplier whose optimal step is ``delta``.

    With rate ``h - log2(delta)`` and distortion ``delta**2 / 6`` per element
    (stochastic rounding), the per-element Lagrangian is stationary at
    ``delta**2 = 3 / (lam * ln 2)``.
    """
    return 3.0 / (np.log(2.0) * delta**2)


RD_COLUMNS = ("delta", "mean_rate_bits_per_elem", "mean_distortion_per_elem", "mean_entropy_bits")


def write_rd_csv(points: Iterable[RDPoint], out: Optional[TextIO] = None) -> str:
    buf = out if out is not None else io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RD_COLUMNS)
    for p in points:
        w.writerow([repr(p.delta), repr(p.mean_rate), repr(p.mean_distortion), repr(p.mean_entropy)])
    return buf.getvalue() if out is None else ""

