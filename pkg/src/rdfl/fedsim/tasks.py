"""Synthetic heterogeneous federated datasets."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..updates import make_rng

KINDS = ("linear_regression", "logistic_regression", "small_mlp")


@dataclass(frozen=True)
class TaskSpec:
    """Recipe for a reproducible federated dataset.

    ``dimension`` is the number of input features. Client sizes follow a
    truncated power law with density proportional to ``n**-size_exponent`` on
    ``[min_size, max_size]``. For classification, each client's label mix is
    drawn from ``Dirichlet(label_skew)`` (``inf`` gives uniform mixes) and every
    client also gets a feature offset of scale ``feature_skew``.
    """

    kind: str = "logistic_regression"
    dimension: int = 99
    num_clients: int = 100
    num_classes: int = 10
    hidden: int = 16
    size_exponent: float = 1.5
    min_size: int = 10
    max_size: int = 1000
    label_skew: float = 0.5
    feature_skew: float = 0.5
    class_separation: float = 3.0
    noise: float = 1.0
    test_size: int = 2000
    master_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}; expected one of {KINDS}")
        if self.num_clients < 1 or self.dimension < 1:
            raise ValueError("need at least one client and one feature")
        if not 1 <= self.min_size <= self.max_size:
            raise ValueError("need 1 <= min_size <= max_size")
        if self.label_skew <= 0:
            raise ValueError("label_skew must be positive (use inf for homogeneous labels)")
        if self.kind != "linear_regression" and self.num_classes < 2:
            raise ValueError("classification needs at least two classes")

    @property
    def is_classification(self) -> bool:
        return self.kind != "linear_regression"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ClientData:
    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True, eq=False)
class FederatedDataset:
    spec: TaskSpec
    clients: list
    test: ClientData

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clients])


def power_law_cdf(x, exponent: float, lo: float, hi: float):
    """CDF of the density proportional to ``x**-exponent`` on ``[lo, hi]``."""
    x = np.clip(np.asarray(x, dtype=np.float64), lo, hi)
    if lo == hi:
        return np.where(x >= hi, 1.0, 0.0)
    if math.isclose(exponent, 1.0):
        return np.log(x / lo) / np.log(hi / lo)
    a = 1.0 - exponent
    return (x**a - lo**a) / (hi**a - lo**a)


def sample_power_law(rng: np.random.Generator, n: int, exponent: float, lo: float, hi: float) -> np.ndarray:
    """Inverse-CDF samples of the truncated power law (continuous)."""
    p = rng.random(n)
    if lo == hi:
        return np.full(n, float(lo))
    if math.isclose(exponent, 1.0):
        return lo * (hi / lo) ** p
    a = 1.0 - exponent
    return (lo**a + p * (hi**a - lo**a)) ** (1.0 / a)


def client_sizes(rng: np.random.Generator, spec: TaskSpec) -> np.ndarray:
    x = sample_power_law(rng, spec.num_clients, spec.size_exponent, spec.min_size, spec.max_size + 1)
    return np.minimum(np.floor(x).astype(np.int64), spec.max_size)


def _label_mix(rng: np.random.Generator, spec: TaskSpec) -> np.ndarray:
    if math.isinf(spec.label_skew):
        return np.full(spec.num_classes, 1.0 / spec.num_classes)
    return rng.dirichlet(np.full(spec.num_classes, spec.label_skew))


def generate_task(spec: TaskSpec) -> FederatedDataset:
    """Build every client's data and a global test set from ``spec.master_seed``.

    Classification: class means ``mu_c ~ N(0, sep^2/F I)``, inputs
    ``x = mu_y + offset_k + noise * N(0, I)``. Regression: inputs
    ``x = offset_k + N(0, I)`` and targets ``x . w* + noise * N(0, 1)``.
    The test set uses uniform labels and no client offset.
    """
    seed, F = spec.master_seed, spec.dimension
    g = make_rng(seed, "task", "global")
    sizes = client_sizes(make_rng(seed, "task", "sizes"), spec)
    if spec.is_classification:
        means = g.normal(0.0, spec.class_separation / math.sqrt(F), (spec.num_classes, F))
    else:
        w_true = g.normal(0.0, 1.0 / math.sqrt(F), F)

    def draw(rng, n, mix, offset):
        if spec.is_classification:
            y = rng.choice(spec.num_classes, size=n, p=mix)
            X = means[y] + offset + spec.noise * rng.normal(size=(n, F))
            return ClientData(X, y.astype(np.int64))
        X = offset + rng.normal(size=(n, F))
        return ClientData(X, X @ w_true + spec.noise * rng.normal(size=n))

    clients = []
    for k, n in enumerate(sizes):
        rng = make_rng(seed, "task", "client", k)
        mix = _label_mix(rng, spec) if spec.is_classification else None
        offset = rng.normal(0.0, spec.feature_skew / math.sqrt(F), F)
        clients.append(draw(rng, int(n), mix, offset))
    uniform = np.full(spec.num_classes, 1.0 / spec.num_classes) if spec.is_classification else None
    test = draw(make_rng(seed, "task", "test"), spec.test_size, uniform, np.zeros(F))
    return FederatedDataset(spec, clients, test)
