"""Synthetic client updates: a spike at zero plus symmetric heavy tails."""

from __future__ import annotations

import numpy as np

from .updates import ClientUpdate, make_rng


def zero_inflated_laplace(rng: np.random.Generator, d: int, sparsity: float, scale: float = 1.0) -> np.ndarray:
    u = rng.laplace(0.0, scale, d)
    u[rng.random(d) < sparsity] = 0.0
    return u


def zero_inflated_power_law(
    rng: np.random.Generator, d: int, sparsity: float, scale: float = 1.0, tail: float = 3.0
) -> np.ndarray:
    """Student-t values (tail index ``tail``) with a point mass at zero."""
    u = scale * rng.standard_t(tail, d)
    u[rng.random(d) < sparsity] = 0.0
    return u


def synthetic_updates(
    num_clients: int,
    d: int,
    seed: int,
    kind: str = "power_law",
    sparsity: float = 0.9,
    scale: float = 1.0,
    tail: float = 3.0,
    norm_sigma: float = 0.0,
    round: int = 0,
) -> list[ClientUpdate]:
    """Independent updates; with ``norm_sigma > 0`` each client is rescaled by a
    log-normal factor ``exp(N(0, norm_sigma^2))`` to mimic heterogeneous norms."""
    out = []
    for k in range(num_clients):
        rng = make_rng(seed, "synthetic", round, k)
        if kind == "laplace":
            u = zero_inflated_laplace(rng, d, sparsity, scale)
        elif kind == "power_law":
            u = zero_inflated_power_law(rng, d, sparsity, scale, tail)
        else:
            raise ValueError(f"unknown update kind {kind!r}")
        if norm_sigma > 0:
            u = u * rng.lognormal(0.0, norm_sigma)
        out.append(ClientUpdate(u, weight=1.0, client_id=k, round=round))
    return out
