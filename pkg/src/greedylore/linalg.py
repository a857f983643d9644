"""Dense linear algebra used by every compressor.

Matrices are plain ``float64`` numpy arrays. The only structured types here are
:class:`SvdResult` and :class:`Projector`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

ORTHO_TOL = 1e-10
RECON_TOL = 1e-8
# components at or below this magnitude are skipped when fixing signs
_SIGN_EPS = 1e-12


class NonFiniteMatrixError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def check_finite(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteMatrixError("non-finite matrix")


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        m, n = self.u.shape[0], self.v.shape[0]
        s = np.zeros((m, n))
        k = len(self.sigma)
        s[:k, :k] = np.diag(self.sigma)
        return self.u @ s @ self.v.T


@dataclass(frozen=True)
class Projector:
    """An m x r matrix with orthonormal columns.

    ``column_indices`` are 0-based positions in the basis the columns were
    taken from, sorted ascending, or ``None`` for projectors that were not
    built by column selection.
    """

    basis: np.ndarray
    column_indices: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        b = as_matrix(self.basis)
        if b.shape[1] > b.shape[0]:
            raise ValueError("projector rank exceeds row dimension")
        object.__setattr__(self, "basis", b)
        if self.column_indices is not None:
            idx = tuple(int(i) for i in self.column_indices)
            if len(idx) != b.shape[1]:
                raise ValueError("column_indices length must equal projector rank")
            if list(idx) != sorted(set(idx)):
                raise ValueError("column_indices must be distinct and ascending")
            object.__setattr__(self, "column_indices", idx)

    @property
    def m(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def from_columns(cls, u: np.ndarray, indices: Sequence[int]) -> "Projector":
        idx = sorted(int(i) for i in indices)
        return cls(np.ascontiguousarray(u[:, idx]), tuple(idx))

    @classmethod
    def identity(cls, m: int) -> "Projector":
        return cls(np.eye(m), tuple(range(m)))


def _fix_signs(u: np.ndarray, v: np.ndarray, k: int) -> None:
    """Make the first non-negligible entry of each column of ``u`` positive.

    Columns ``j < k`` of ``v`` flip together with ``u``; the remaining columns
    of ``v`` (null-space directions) get the same rule applied independently.
    Operates in place.
    """

    def first_sign(col: np.ndarray) -> float:
        nz = np.flatnonzero(np.abs(col) > _SIGN_EPS)
        if nz.size == 0:
            return 1.0
        return -1.0 if col[nz[0]] < 0 else 1.0

    for j in range(u.shape[1]):
        s = first_sign(u[:, j])
        if s < 0:
            u[:, j] *= -1.0
            if j < k:
                v[:, j] *= -1.0
    for j in range(k, v.shape[1]):
        if first_sign(v[:, j]) < 0:
            v[:, j] *= -1.0


def svd_full(g) -> SvdResult:
    """Full SVD with deterministic ordering and signs.

    Singular values come out descending, ties kept in the order LAPACK
    produced them. An all-zero input returns identity factors.
    """
    g = as_matrix(g)
    check_finite(g)
    m, n = g.shape
    k = min(m, n)
    if not np.any(g):
        return SvdResult(np.eye(m), np.zeros(k), np.eye(n))
    u, s, vt = np.linalg.svd(g, full_matrices=True)
    order = np.argsort(-s, kind="stable")
    u = np.array(u, copy=True)
    v = np.array(vt.T, copy=True)
    u[:, :k] = u[:, order]
    v[:, :k] = v[:, order]
    s = s[order]
    _fix_signs(u, v, k)
    return SvdResult(u, np.maximum(s, 0.0), v)


def _check_rows(p: Projector, g: np.ndarray) -> None:
    if p.m != g.shape[0]:
        raise ValueError(f"dimension mismatch: projector has {p.m} rows, matrix has {g.shape[0]}")


def project(p: Projector, g) -> np.ndarray:
    """Return the r x n coordinates ``P^T G``."""
    g = as_matrix(g)
    _check_rows(p, g)
    return p.basis.T @ g


def reconstruct(p: Projector, r) -> np.ndarray:
    """Return ``P R``; inverse of :func:`project` on span(P)."""
    r = as_matrix(r)
    if r.shape[0] != p.rank:
        raise ValueError(f"dimension mismatch: projector rank {p.rank}, coordinates have {r.shape[0]} rows")
    return p.basis @ r


def frobenius_norm_sq(g) -> float:
    g = np.asarray(g, dtype=np.float64)
    return float(np.vdot(g, g))


def is_orthonormal(q: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    k = q.shape[1]
    err = np.linalg.norm(q.T @ q - np.eye(k))
    return bool(err <= tol * max(1.0, np.sqrt(k)))


def modified_gram_schmidt(a: np.ndarray) -> np.ndarray:
    """Orthonormalize the columns of ``a`` in column order.

    Raises if the columns are numerically dependent.
    """
    q = as_matrix(a).copy()
    for j in range(q.shape[1]):
        # two sweeps keep orthonormality near machine precision
        for _ in range(2):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        nrm = np.linalg.norm(q[:, j])
        if nrm < 1e-12:
            raise np.linalg.LinAlgError("columns are linearly dependent")
        q[:, j] /= nrm
    return q
