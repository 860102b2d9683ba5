"""Small models over a flat parameter vector."""

from __future__ import annotations

import math

import numpy as np

from .tasks import TaskSpec


def _with_bias(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _softmax_xent(logits: np.ndarray, y: np.ndarray):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = y.shape[0]
    loss = -logp[np.arange(n), y].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    return loss, dlogits / n


class LinearRegression:
    """Squared error ``0.5 * mean((x.w + b - y)^2)``."""

    classification = False

    def __init__(self, features: int):
        self.size = features + 1

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.size)

    def predict(self, theta, X):
        return _with_bias(X) @ theta

    def loss_and_grad(self, theta, X, y):
        Xb = _with_bias(X)
        r = Xb @ theta - y
        return 0.5 * float(r @ r) / y.size, Xb.T @ r / y.size

    def loss(self, theta, X, y):
        r = self.predict(theta, X) - y
        return 0.5 * float(r @ r) / y.size


class SoftmaxRegression:
    """Multinomial logistic regression; ``theta`` is the flattened ``(features + 1, classes)`` matrix."""

    classification = True

    def __init__(self, features: int, classes: int):
        self.shape = (features + 1, classes)
        self.size = self.shape[0] * self.shape[1]

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.size)

    def predict(self, theta, X):
        return _with_bias(X) @ theta.reshape(self.shape)

    def loss_and_grad(self, theta, X, y):
        Xb = _with_bias(X)
        loss, dlogits = _softmax_xent(Xb @ theta.reshape(self.shape), y)
        return float(loss), (Xb.T @ dlogits).ravel()

    def loss(self, theta, X, y):
        return float(_softmax_xent(self.predict(theta, X), y)[0])


class MLP:
    """One tanh hidden layer followed by a softmax output."""

    classification = True

    def __init__(self, features: int, hidden: int, classes: int):
        self.s1 = (features + 1, hidden)
        self.s2 = (hidden + 1, classes)
        self.n1 = self.s1[0] * self.s1[1]
        self.size = self.n1 + self.s2[0] * self.s2[1]

    def init(self, rng: np.random.Generator) -> np.ndarray:
        w1 = rng.normal(0.0, 1.0 / math.sqrt(self.s1[0]), self.s1)
        w2 = rng.normal(0.0, 1.0 / math.sqrt(self.s2[0]), self.s2)
        return np.concatenate([w1.ravel(), w2.ravel()])

    def _forward(self, theta, X):
        W1 = theta[: self.n1].reshape(self.s1)
        W2 = theta[self.n1 :].reshape(self.s2)
        Xb = _with_bias(X)
        H = np.tanh(Xb @ W1)
        Hb = _with_bias(H)
        return Xb, H, Hb, W2, Hb @ W2

    def predict(self, theta, X):
        return self._forward(theta, X)[-1]

    def loss_and_grad(self, theta, X, y):
        Xb, H, Hb, W2, logits = self._forward(theta, X)
        loss, dlogits = _softmax_xent(logits, y)
        g2 = Hb.T @ dlogits
        dH = (dlogits @ W2[:-1].T) * (1.0 - H**2)
        g1 = Xb.T @ dH
        return float(loss), np.concatenate([g1.ravel(), g2.ravel()])

    def loss(self, theta, X, y):
        return float(_softmax_xent(self.predict(theta, X), y)[0])


def build_model(spec: TaskSpec):
    if spec.kind == "linear_regression":
        return LinearRegression(spec.dimension)
    if spec.kind == "logistic_regression":
        return SoftmaxRegression(spec.dimension, spec.num_classes)
    return MLP(spec.dimension, spec.hidden, spec.num_classes)
