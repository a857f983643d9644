"""Synthetic objectives with exact gradients and Gaussian stochastic oracles.

Every problem is a global objective ``f = mean_i f_i`` over ``n_nodes`` local
objectives. Stochastic gradients add i.i.d. Gaussian noise with per-entry
variance ``sigma**2 / (m * n)``, so the expected squared Frobenius norm of the
noise is exactly ``sigma**2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import rng as rngmod

PROBLEM_KINDS = ("quadratic", "counterexample", "logistic")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str = "quadratic"
    m: int = 32
    n: int = 32
    L: float = 1.0
    sigma: float = 0.0
    heterogeneity: float = 0.0
    n_nodes: int = 1
    seed: int = 0
    # logistic only
    samples_per_node: int = 64
    feature_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.m < 1 or self.n < 1 or self.n_nodes < 1:
            raise ValueError("dimensions and node count must be positive")
        if self.L <= 0:
            raise ValueError("smoothness L must be positive")
        if self.sigma < 0 or self.heterogeneity < 0:
            raise ValueError("sigma and heterogeneity must be nonnegative")
        if self.kind == "counterexample" and (self.m, self.n) != (2, 2):
            raise ValueError("the counterexample problem is 2 x 2")


class Problem:
    """Base class; subclasses provide ``local_loss`` and ``local_grad``."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.shape = (spec.m, spec.n)

    @property
    def n_nodes(self) -> int:
        return self.spec.n_nodes

    def _check(self, x: np.ndarray) -> None:
        if x.shape != self.shape:
            raise ValueError(f"dimension mismatch: expected {self.shape}, got {x.shape}")

    def local_loss(self, node_id: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def local_grad(self, node_id: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def loss(self, x: np.ndarray) -> float:
        self._check(x)
        return float(np.mean([self.local_loss(i, x) for i in range(1, self.n_nodes + 1)]))

    def grad(self, node_id: int, x: np.ndarray) -> np.ndarray:
        self._check(x)
        if not 1 <= node_id <= self.n_nodes:
            raise ValueError(f"node_id {node_id} outside [1, {self.n_nodes}]")
        return self.local_grad(node_id, x)

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        self._check(x)
        return sum(self.local_grad(i, x) for i in range(1, self.n_nodes + 1)) / self.n_nodes

    def noise(self, rng: np.random.Generator) -> np.ndarray:
        m, n = self.shape
        return rng.standard_normal(self.shape) * (self.spec.sigma / np.sqrt(m * n))

    def stochastic_grad(self, node_id: int, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        g = self.grad(node_id, x)
        if self.spec.sigma == 0.0:
            return g
        return g + self.noise(rng)

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.shape)


class Quadratic(Problem):
    """``f_i(X) = (L/2) ||X - C_i||_F^2`` with seeded or explicit centers."""

    def __init__(self, spec: ProblemSpec, centers: Optional[Sequence[np.ndarray]] = None):
        super().__init__(spec)
        if centers is None:
            g = rngmod.stream(spec.seed, "problem", 0)
            centers = [spec.heterogeneity * g.standard_normal(self.shape) for _ in range(spec.n_nodes)]
        centers = [np.asarray(c, dtype=np.float64) for c in centers]
        if len(centers) != spec.n_nodes or any(c.shape != self.shape for c in centers):
            raise ValueError("need one center of shape (m, n) per node")
        self.centers = centers
        self.center_mean = sum(centers) / len(centers)

    def local_loss(self, node_id, x):
        d = x - self.centers[node_id - 1]
        return 0.5 * self.spec.L * float(np.vdot(d, d))

    def local_grad(self, node_id, x):
        return self.spec.L * (x - self.centers[node_id - 1])

    def minimum_value(self) -> float:
        return self.loss(self.center_mean)


class Counterexample(Problem):
    """2 x 2 quadratic whose diagonal part is ``L x^2/2 + L y^2/4``.

    Off-diagonal entries carry ``(L/2) X_ij^2`` so the objective is defined and
    L-smooth on all of R^{2x2}; along diagonal iterates they stay zero.
    """

    def __init__(self, spec: ProblemSpec):
        super().__init__(spec)
        L = spec.L
        self.weights = np.array([[L, L], [L, L / 2]])

    def local_loss(self, node_id, x):
        return 0.5 * float(np.sum(self.weights * x * x))

    def local_grad(self, node_id, x):
        return self.weights * x

    def initial_point(self) -> np.ndarray:
        return np.eye(2)


class Logistic(Problem):
    """Softmax regression on seeded Gaussian blobs, one weight row per class.

    ``X`` has shape (classes, features) = (m, n). Samples are sorted by label
    and dealt to nodes in contiguous blocks, so each node sees a skewed label
    mix. ``L`` is ignored; :attr:`smoothness` is computed from the
    data (softmax curvature is at most 1/2 per unit feature energy).
    """

    def __init__(self, spec: ProblemSpec):
        super().__init__(spec)
        g = rngmod.stream(spec.seed, "problem", 1)
        m, n = self.shape
        total = spec.samples_per_node * spec.n_nodes
        means = 2.0 * g.standard_normal((m, n)) / np.sqrt(n)
        labels = np.arange(total) % m
        feats = means[labels] + 0.5 * g.standard_normal((total, n)) / np.sqrt(n)
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        # bounded features keep gradients bounded
        feats = spec.feature_scale * feats / np.maximum(norms, 1.0)
        order = np.argsort(labels, kind="stable")
        feats, labels = feats[order], labels[order]
        self.shards = [
            (feats[i * spec.samples_per_node:(i + 1) * spec.samples_per_node],
             labels[i * spec.samples_per_node:(i + 1) * spec.samples_per_node])
            for i in range(spec.n_nodes)
        ]
        self.smoothness = 0.5 * max(
            float(np.linalg.eigvalsh(a.T @ a / len(a)).max()) for a, _ in self.shards
        )

    @staticmethod
    def _softmax(z):
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def local_loss(self, node_id, x):
        a, y = self.shards[node_id - 1]
        z = a @ x.T
        zmax = z.max(axis=1, keepdims=True)
        lse = (zmax + np.log(np.exp(z - zmax).sum(axis=1, keepdims=True))).ravel()
        return float(np.mean(lse - z[np.arange(len(y)), y]))

    def local_grad(self, node_id, x):
        a, y = self.shards[node_id - 1]
        p = self._softmax(a @ x.T)
        p[np.arange(len(y)), y] -= 1.0
        return p.T @ a / len(y)


def make_problem(spec: ProblemSpec, centers=None) -> Problem:
    if spec.kind == "quadratic":
        return Quadratic(spec, centers)
    if spec.kind == "counterexample":
        return Counterexample(spec)
    return Logistic(spec)
