"""Momentum SGD and Adam, without bias correction.

Adam has two modes. ``practical`` divides elementwise by ``sqrt(v) + eps``.
``amsgrad`` keeps a single running maximum of the largest entry of ``v`` and
divides every entry by ``sqrt(v_max + eps)``, so the effective step size can
only shrink.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np


def _check(x: np.ndarray, g: np.ndarray) -> None:
    if x.shape != g.shape:
        raise ValueError(f"shape mismatch: parameters {x.shape}, gradient {g.shape}")


@dataclass
class MsgdState:
    gamma: float
    beta: float = 0.9
    m: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.gamma <= 0:
            raise ValueError("learning rate must be positive")

    def step(self, x: np.ndarray, g_hat: np.ndarray, gamma: Optional[float] = None) -> np.ndarray:
        return msgd_step(x, g_hat, self, gamma)


def msgd_step(x: np.ndarray, g_hat: np.ndarray, s: MsgdState, gamma: Optional[float] = None) -> np.ndarray:
    _check(x, g_hat)
    if s.m is None:
        s.m = np.zeros_like(x)
    s.m = s.beta * s.m + (1.0 - s.beta) * g_hat
    lr = s.gamma if gamma is None else gamma
    return x - lr * s.m


@dataclass
class AdamState:
    gamma: float
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-8
    mode: str = "practical"
    m: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    v_tilde: float = 0.0
    # history of the amsgrad scalar normalizer, one entry per step
    normalizers: list[float] = field(default_factory=list)

    def __post_init__(self):
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.gamma <= 0 or self.epsilon <= 0:
            raise ValueError("learning rate and epsilon must be positive")
        if self.mode not in ("practical", "amsgrad"):
            raise ValueError(f"unknown Adam mode {self.mode!r}")

    def step(self, x: np.ndarray, g_hat: np.ndarray, gamma: Optional[float] = None) -> np.ndarray:
        return adam_step(x, g_hat, self, gamma)

    def reset(self) -> None:
        self.m = None
        self.v = None


def adam_direction(g: np.ndarray, s: AdamState) -> np.ndarray:
    """Advance the moments with ``g`` and return the normalized direction."""
    if s.m is None:
        s.m = np.zeros_like(g)
        s.v = np.zeros_like(g)
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * g
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * (g * g)
    if s.mode == "practical":
        return s.m / (np.sqrt(s.v) + s.epsilon)
    s.v_tilde = max(s.v_tilde, float(np.max(s.v)))
    normalizer = 1.0 / np.sqrt(s.v_tilde + s.epsilon)
    s.normalizers.append(normalizer)
    return s.m * normalizer


def adam_step(x: np.ndarray, g_hat: np.ndarray, s: AdamState, gamma: Optional[float] = None) -> np.ndarray:
    _check(x, g_hat)
    lr = s.gamma if gamma is None else gamma
    return x - lr * adam_direction(g_hat, s)


OptimizerState = Union[MsgdState, AdamState]


def make_optimizer(kind: str, **params) -> OptimizerState:
    if kind == "msgd":
        return MsgdState(gamma=params["gamma"], beta=params.get("beta", 0.9))
    if kind == "adam":
        return AdamState(
            gamma=params["gamma"],
            beta1=params.get("beta1", 0.9),
            beta2=params.get("beta2", 0.99),
            epsilon=params.get("epsilon", 1e-8),
            mode=params.get("mode", "practical"),
        )
    raise ValueError(f"unknown optimizer {kind!r}")


def learning_rate(base: float, schedule: str, t: int, total_steps: int) -> float:
    """Constant, or linear decay from ``base`` at t=0 towards zero at ``total_steps``."""
    if schedule == "constant":
        return base
    if schedule == "linear":
        return base * (1.0 - t / total_steps)
    raise ValueError(f"unknown schedule {schedule!r}")
