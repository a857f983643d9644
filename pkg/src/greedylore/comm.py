"""Simulated collectives and the per-node communication ledger."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

FULL_GRAD = "full_grad"
LOWRANK = "lowrank"
LAMBDA_VEC = "lambda_vec"
SPARSE = "sparse"
KINDS = (FULL_GRAD, LOWRANK, LAMBDA_VEC, SPARSE)


@dataclass
class CommLedger:
    """Scalars each node contributes to collectives, with one event per call."""

    scalars_allreduce: int = 0
    events: list[tuple[int, str, int]] = field(default_factory=list)

    def record(self, step: int, kind: str, count: int) -> None:
        if kind not in KINDS:
            raise ValueError(f"unknown communication kind {kind!r}")
        if count < 0:
            raise ValueError("scalar count must be nonnegative")
        self.scalars_allreduce += int(count)
        self.events.append((int(step), kind, int(count)))

    def totals_by_kind(self) -> "OrderedDict[str, int]":
        totals = OrderedDict((k, 0) for k in KINDS)
        for _, kind, count in self.events:
            totals[kind] += count
        return totals

    def average_per_step(self, steps: int) -> float:
        return self.scalars_allreduce / steps

    def summary_text(self, steps: int) -> str:
        lines = ["# communication ledger (scalars per node)"]
        for kind, total in self.totals_by_kind().items():
            lines.append(f"{kind} = {total}")
        lines.append(f"total = {self.scalars_allreduce}")
        lines.append(f"steps = {steps}")
        lines.append(f"average_per_step = {self.scalars_allreduce / steps!r}")
        return "\n".join(lines) + "\n"


def tree_sum(items: Sequence[np.ndarray]) -> np.ndarray:
    """Pairwise summation over a fixed balanced tree (left half + right half)."""
    if len(items) == 1:
        return np.array(items[0], dtype=np.float64, copy=True)
    mid = (len(items) + 1) // 2
    return tree_sum(items[:mid]) + tree_sum(items[mid:])


def all_reduce_mean(
    items: Union[Mapping[int, np.ndarray], Sequence[np.ndarray]],
    ledger: CommLedger | None = None,
    kind: str = FULL_GRAD,
    step: int = 0,
) -> np.ndarray:
    """Exact mean over nodes, independent of arrival order.

    ``items`` is either a mapping ``node_id -> array`` (summed in ascending
    node_id order) or a sequence already in node order. One ledger event of
    ``array.size`` scalars is recorded.
    """
    if isinstance(items, Mapping):
        ordered = [np.asarray(items[k], dtype=np.float64) for k in sorted(items)]
    else:
        ordered = [np.asarray(a, dtype=np.float64) for a in items]
    if not ordered:
        raise ValueError("all-reduce over an empty node list")
    shape = ordered[0].shape
    for a in ordered:
        if a.shape != shape:
            raise ValueError(f"shape mismatch in all-reduce: {a.shape} vs {shape}")
    total = tree_sum(ordered)
    if ledger is not None:
        ledger.record(step, kind, int(np.prod(shape)))
    if len(ordered) == 1:
        return total
    return total / len(ordered)
