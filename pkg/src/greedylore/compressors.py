"""Projector selection and compression operators.

Selection rules: top-r and top-k pick the largest scores, and on equal scores
the smaller index wins. Column indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .comm import LAMBDA_VEC, CommLedger, all_reduce_mean
from .linalg import (
    Projector,
    as_matrix,
    frobenius_norm_sq,
    modified_gram_schmidt,
    svd_full,
)

COMPRESSOR_TAGS = ("greedylore", "lazy_svd", "galore", "random_lowrank", "top_k", "rand_k", "none")
# reserved in the registry, not implemented
RESERVED_TAGS = ("powersgd",)


class RankError(ValueError):
    pass


@dataclass(frozen=True)
class CompressorKind:
    tag: str
    rank: Optional[int] = None
    k: Optional[int] = None

    def __post_init__(self):
        if self.tag in RESERVED_TAGS:
            raise NotImplementedError(f"compressor {self.tag!r} is reserved but not implemented")
        if self.tag not in COMPRESSOR_TAGS:
            raise ValueError(f"unknown compressor {self.tag!r}")
        if self.tag in ("greedylore", "lazy_svd", "galore", "random_lowrank"):
            if self.rank is None or self.rank < 1:
                raise ValueError("rank must be >= 1")
        if self.tag in ("top_k", "rand_k"):
            if self.k is None or self.k < 1:
                raise ValueError("k must be >= 1")


@dataclass
class CompressorState:
    """Semi-lazy machinery: cached basis, current projector, period position."""

    m: int
    rank: int
    period: int
    basis_u: np.ndarray = None
    projector: Projector = None
    step_in_period: int = 0

    def __post_init__(self):
        if self.rank > self.m:
            raise RankError("rank exceeds row dimension")
        if self.period < 1:
            raise ValueError("period must be >= 1")
        if self.basis_u is None:
            self.basis_u = np.eye(self.m)
        if self.projector is None:
            self.projector = Projector.from_columns(self.basis_u, range(self.rank))


def top_indices(scores: np.ndarray, r: int) -> list[int]:
    """Indices of the ``r`` largest scores, smaller index first on ties, sorted."""
    scores = np.asarray(scores, dtype=np.float64)
    if r > scores.size:
        raise RankError("rank exceeds row dimension")
    order = np.lexsort((np.arange(scores.size), -scores))
    return sorted(int(i) for i in order[:r])


def lazy_svd_update(state: CompressorState, g_avg: Optional[np.ndarray], t: int) -> Projector:
    """Refresh the projector from the SVD of ``g_avg`` at period starts only."""
    state.step_in_period = t % state.period
    if state.step_in_period == 0:
        g_avg = as_matrix(g_avg)
        if state.rank > g_avg.shape[0]:
            raise RankError("rank exceeds row dimension")
        state.basis_u = svd_full(g_avg).u
        state.projector = Projector.from_columns(state.basis_u, range(state.rank))
    return state.projector


def row_energies(basis_u: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``||u_j^T G||^2`` for every column ``u_j`` of the basis."""
    coords = basis_u.T @ g
    return np.einsum("jk,jk->j", coords, coords)


def exact_top_r_select(basis_u: np.ndarray, g_global: np.ndarray, r: int) -> Projector:
    """Pick the r basis columns capturing the most energy of ``g_global``."""
    g_global = as_matrix(g_global)
    if r > basis_u.shape[1]:
        raise RankError("rank exceeds row dimension")
    return Projector.from_columns(basis_u, top_indices(row_energies(basis_u, g_global), r))


def draw_sketch_vectors(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """Row j is the sketch vector v_j ~ N(0, I_n)."""
    return rng.standard_normal((m, n))


def local_lambdas(g: np.ndarray, basis_u: np.ndarray, sketch: np.ndarray) -> np.ndarray:
    """Per-node scalars ``u_j^T G v_j``.

    ``sketch`` may carry leading batch axes, shape ``(..., m, n)``; the result
    then has shape ``(..., m)``.
    """
    coords = basis_u.T @ g
    return np.einsum("jk,...jk->...j", coords, sketch)


def approx_top_r(
    local_grads: Union[Mapping[int, np.ndarray], Sequence[np.ndarray]],
    basis_u: np.ndarray,
    r: int,
    shared_rng: np.random.Generator,
    ledger: CommLedger | None = None,
    step: int = 0,
) -> Projector:
    """Select r basis columns from averaged one-dimensional sketches.

    Each node sends m scalars instead of its gradient; the mean of those
    scalars, squared, estimates the global row energy without bias.
    """
    items = dict(local_grads) if isinstance(local_grads, Mapping) else dict(enumerate(local_grads))
    if not items:
        raise ValueError("empty node list")
    m = basis_u.shape[1]
    if r > m:
        raise RankError("rank exceeds row dimension")
    n = next(iter(items.values())).shape[1]
    sketch = draw_sketch_vectors(shared_rng, m, n)
    lambdas = {i: local_lambdas(g, basis_u, sketch) for i, g in items.items()}
    lam_bar = all_reduce_mean(lambdas, ledger, LAMBDA_VEC, step)
    return Projector.from_columns(basis_u, top_indices(lam_bar * lam_bar, r))


def compress(p: Projector, g) -> np.ndarray:
    g = as_matrix(g)
    if p.m != g.shape[0]:
        raise ValueError("dimension mismatch")
    return p.basis @ (p.basis.T @ g)


def random_lowrank_projector(m: int, r: int, rng: np.random.Generator) -> Projector:
    """Orthonormalized m x r Gaussian draw (uniform over the Grassmannian)."""
    if r > m:
        raise RankError("rank exceeds row dimension")
    return Projector(modified_gram_schmidt(rng.standard_normal((m, r))))


def sparsify(kind: str, g, k: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """top_k keeps the k largest magnitudes; rand_k keeps k random entries scaled by mn/k."""
    g = as_matrix(g)
    size = g.size
    if not 1 <= k <= size:
        raise ValueError(f"k={k} out of range [1, {size}]")
    flat = g.ravel()
    out = np.zeros(size)
    if kind == "top_k":
        keep = top_indices(np.abs(flat), k)
        out[keep] = flat[keep]
    elif kind == "rand_k":
        if rng is None:
            raise ValueError("rand_k needs an rng")
        keep = rng.choice(size, size=k, replace=False)
        out[keep] = flat[keep] * (size / k)
    else:
        raise ValueError(f"unknown sparsifier {kind!r}")
    return out.reshape(g.shape)


def contraction_ratio(g, g_hat) -> float:
    """``||g_hat - g||^2 / ||g||^2``."""
    denom = frobenius_norm_sq(g)
    if denom == 0.0:
        raise ZeroDivisionError("undefined ratio")
    return frobenius_norm_sq(np.asarray(g_hat) - np.asarray(g)) / denom
