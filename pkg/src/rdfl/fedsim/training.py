"""Federated optimization with compressed client updates.

Each round the server samples clients, every client trains locally from the
broadcast model and sends ``w_k * (theta_k - theta)`` through the configured
compressor, and the server applies its optimizer to the pseudo-gradient
``g = -sum(decoded) / sum(w_k)``. Nothing about a client survives the round.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..baselines import BaselineConfig, baseline_encode, decode_any
from ..codec import HEADER_BITS, EncodedUpdate, encode_update
from ..updates import ClientUpdate, Quantizer, make_rng
from .models import build_model
from .tasks import ClientData, FederatedDataset


@dataclass(frozen=True)
class CodecConfig:
    """The main codec with a global step size."""

    step: float
    quantizer: str = "stochastic"
    code: str = "gamma"

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        Quantizer.parse(self.quantizer)

    @property
    def label(self) -> str:
        return f"ours:{self.step:g}" if self.quantizer == "stochastic" else f"{self.quantizer}:{self.step:g}"


Compressor = Union[CodecConfig, BaselineConfig, None]


@dataclass(frozen=True)
class FedConfig:
    rounds: int = 200
    clients_per_round: int = 10
    local_epochs: int = 1
    batch_size: int = 32
    client_lr: float = 0.005
    server_lr: float = 1.0
    server_opt: str = "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-3
    compressor: Compressor = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.rounds < 1 or self.clients_per_round < 1 or self.local_epochs < 1 or self.batch_size < 1:
            raise ValueError("rounds, clients_per_round, local_epochs and batch_size must be >= 1")
        if not (self.client_lr >= 0 and self.server_lr > 0):
            raise ValueError("learning rates must be positive")
        if self.server_opt not in ("sgd", "adam"):
            raise ValueError(f"server_opt must be 'sgd' or 'adam', not {self.server_opt!r}")

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "compressor"}
        c = self.compressor
        out["compressor"] = None if c is None else {"type": type(c).__name__, **asdict(c)}
        return out


# Local and server steps.


def local_train(theta, data: ClientData, model, epochs: int, lr: float, batch_size: int, rng: np.random.Generator):
    """``epochs`` passes of shuffled mini-batch SGD starting from ``theta``."""
    theta = np.array(theta, dtype=np.float64)
    n = len(data)
    if n == 0 or lr == 0:
        return theta
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            _, grad = model.loss_and_grad(theta, data.X[idx], data.y[idx])
            theta -= lr * grad
    return theta


@dataclass
class ServerState:
    step: int = 0
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None


def server_update(theta, g, state: ServerState, config: FedConfig):
    """SGD: ``theta - lr * g``. Adam: bias-corrected moments on the server."""
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if theta.shape != g.shape:
        raise ValueError("parameter and pseudo-gradient shapes differ")
    if config.server_opt == "sgd":
        return theta - config.server_lr * g, ServerState(state.step + 1)
    t = state.step + 1
    m = (1 - config.beta1) * g if state.m is None else config.beta1 * state.m + (1 - config.beta1) * g
    v = (1 - config.beta2) * g * g if state.v is None else config.beta2 * state.v + (1 - config.beta2) * g * g
    m_hat = m / (1 - config.beta1**t)
    v_hat = v / (1 - config.beta2**t)
    return theta - config.server_lr * m_hat / (np.sqrt(v_hat) + config.eps), ServerState(t, m, v)


def evaluate(theta, data: ClientData, model) -> dict:
    """Mean loss, plus accuracy for classifiers (``nan`` for regression)."""
    loss = model.loss(theta, data.X, data.y)
    if model.classification:
        acc = float(np.mean(np.argmax(model.predict(theta, data.X), axis=1) == data.y))
    else:
        acc = math.nan
    return {"loss": loss, "accuracy": acc}


# Compression plumbing.


def compress(u: np.ndarray, compressor: Compressor, rng: np.random.Generator):
    """Encode and decode one update. Returns (decoded, payload_bits, header_bits).

    ``None`` passes the update through exactly but bills it like the float32
    container (32 bits per element plus a header).
    """
    if compressor is None:
        return u.copy(), 32 * u.size, HEADER_BITS
    if isinstance(compressor, CodecConfig):
        e: EncodedUpdate = encode_update(u, compressor.step, rng, compressor.code, compressor.quantizer)
    else:
        if compressor.method == "drive":
            compressor = replace(compressor, seed=int(rng.integers(0, 2**63)))
        e = baseline_encode(u, compressor, rng)
    return decode_any(e), len(e.payload), HEADER_BITS


# Training loop.

TRACE_COLUMNS = (
    "round",
    "train_loss",
    "eval_loss",
    "eval_accuracy",
    "mean_rate_bits_per_elem",
    "cumulative_upstream_bits",
    "mean_distortion_per_elem",
)


@dataclass
class RoundRecord:
    round: int
    train_loss: float
    eval_loss: float
    eval_accuracy: float
    mean_rate_bits_per_elem: float
    cumulative_upstream_bits: int
    mean_distortion_per_elem: float


@dataclass
class TrainingTrace:
    """Per-round metrics.

    ``mean_rate_bits_per_elem`` is payload bits per element averaged over the
    round's clients; ``cumulative_upstream_bits`` also counts container headers.
    ``mean_distortion_per_elem`` is ``||u - decoded||^2 / d`` averaged over clients.
    """

    records: list = field(default_factory=list)
    final_theta: Optional[np.ndarray] = None

    @property
    def final_accuracy(self) -> float:
        return self.records[-1].eval_accuracy

    @property
    def total_bits(self) -> int:
        return self.records[-1].cumulative_upstream_bits

    @property
    def mean_rate(self) -> float:
        return float(np.mean([r.mean_rate_bits_per_elem for r in self.records]))

    @property
    def mean_distortion(self) -> float:
        return float(np.mean([r.mean_distortion_per_elem for r in self.records]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.records:
            w.writerow([repr(getattr(r, c)) for c in TRACE_COLUMNS])
        return buf.getvalue()

    def write(self, path, config: Optional[dict] = None) -> None:
        """Write the CSV and, if given, the run configuration to ``<stem>.json`` beside it."""
        path = Path(path)
        path.write_text(self.to_csv())
        if config is not None:
            path.with_suffix(".json").write_text(json.dumps(config, indent=2, sort_keys=True, default=str) + "\n")


def _client_round(theta, data, weight, k, t, model, config: FedConfig):
    theta_k = local_train(
        theta, data, model, config.local_epochs, config.client_lr, config.batch_size,
        make_rng(config.seed, "local", t, k),
    )
    u = weight * (theta_k - theta)
    decoded, bits, header = compress(u, config.compressor, make_rng(config.seed, "encode", t, k))
    err = u - decoded
    return u, decoded, bits, header, float(err @ err)


def run_training(dataset: FederatedDataset, config: FedConfig, collect: Optional[list] = None) -> TrainingTrace:
    """Run ``config.rounds`` rounds; clients within a round may run on a thread pool.

    Results are reduced in ascending client order, so the trace does not depend
    on ``config.workers``. If ``collect`` is a list, every raw client update is
    appended to it as a :class:`ClientUpdate`.
    """
    K = len(dataset.clients)
    if config.clients_per_round > K:
        raise ValueError("clients_per_round exceeds the number of clients")
    model = build_model(dataset.spec)
    theta = model.init(make_rng(config.seed, "init"))
    d = theta.size
    weights = dataset.sizes.astype(np.float64)
    state = ServerState()
    trace = TrainingTrace()
    cumulative = 0
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for t in range(config.rounds):
            sampled = np.sort(make_rng(config.seed, "sample", t).choice(K, config.clients_per_round, replace=False))
            w = weights[sampled]
            losses = [model.loss(theta, dataset.clients[k].X, dataset.clients[k].y) if w_k else 0.0
                      for k, w_k in zip(sampled, w)]
            train_loss = float(np.dot(w, losses) / w.sum()) if w.sum() else math.nan
            jobs = [(theta, dataset.clients[k], weights[k], int(k), t, model, config) for k in sampled]
            results = list(pool.map(lambda a: _client_round(*a), jobs)) if pool else [_client_round(*a) for a in jobs]
            total = np.zeros(d)
            bits = dists = 0.0
            round_bits = 0
            for k, (u, decoded, b, header, dist) in zip(sampled, results):
                total += decoded
                bits += b
                dists += dist
                round_bits += b + header
                if collect is not None:
                    collect.append(ClientUpdate(u, float(weights[k]), int(k), t))
            g = -total / w.sum() if w.sum() else np.zeros(d)
            theta, state = server_update(theta, g, state, config)
            cumulative += round_bits
            ev = evaluate(theta, dataset.test, model)
            trace.records.append(
                RoundRecord(
                    round=t,
                    train_loss=train_loss,
                    eval_loss=ev["loss"],
                    eval_accuracy=ev["accuracy"],
                    mean_rate_bits_per_elem=bits / (len(sampled) * d),
                    cumulative_upstream_bits=int(cumulative),
                    mean_distortion_per_elem=dists / (len(sampled) * d),
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    trace.final_theta = theta
    return trace
