"""Per-node error-feedback buffers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Projector, as_matrix


@dataclass
class ErrorBuffer:
    """Compression residual carried into the next step.

    Stored in the working orientation: when a gradient is transposed so its
    rows do not exceed its columns, the buffer is transposed too.
    """

    e: np.ndarray

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "ErrorBuffer":
        return cls(np.zeros(shape))

    def reset(self) -> None:
        self.e = np.zeros_like(self.e)


def inject(raw_grad, buf: ErrorBuffer) -> np.ndarray:
    raw_grad = as_matrix(raw_grad)
    if raw_grad.shape != buf.e.shape:
        raise ValueError(f"shape mismatch: gradient {raw_grad.shape}, buffer {buf.e.shape}")
    return raw_grad + buf.e


def update(buf: ErrorBuffer, g_with_error, p: Projector, r_local, t: int, period: int) -> None:
    """Store ``g_with_error - P r_local``, or zero at a period start.

    ``r_local`` is this node's own coordinates ``P^T g_with_error``, not the
    all-reduced average.
    """
    g_with_error = as_matrix(g_with_error)
    r_local = as_matrix(r_local)
    if g_with_error.shape != buf.e.shape:
        raise ValueError(f"shape mismatch: gradient {g_with_error.shape}, buffer {buf.e.shape}")
    if p.m != g_with_error.shape[0] or r_local.shape != (p.rank, g_with_error.shape[1]):
        raise ValueError("shape mismatch between projector, coordinates and gradient")
    if t % period == 0:
        buf.reset()
    else:
        buf.e = g_with_error - p.basis @ r_local
