"""Adam parameter updates, shared by the Boltzmann classifier and the
feed-forward baseline.

Update rule (per element, ``t`` counting from 1):

    m <- beta1*m + (1-beta1)*g        mhat = m / (1 - beta1**t)
    v <- beta2*v + (1-beta2)*g**2     vhat = v / (1 - beta2**t)
    p <- p - lr * mhat / (sqrt(vhat) + eps)

The epsilon sits outside the square root.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class AdamHyper:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            val = getattr(self, name)
            if not 0.0 <= val < 1.0:
                raise InputError(f"{name} must lie in [0, 1), got {val}")
        if not (np.isfinite(self.eps) and self.eps >= 0):
            raise InputError(f"eps must be non-negative, got {self.eps}")


@dataclass(frozen=True)
class AdamState:
    hyper: AdamHyper
    step: int
    m: np.ndarray
    v: np.ndarray


def init_adam(hyper: AdamHyper, size: int) -> AdamState:
    return AdamState(hyper, 0, np.zeros(size), np.zeros(size))


def adam_update(params: np.ndarray, grads: np.ndarray,
                state: AdamState) -> tuple[np.ndarray, AdamState]:
    """One minimisation step; returns fresh arrays, never mutates inputs."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise InputError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, "
            f"state {state.m.shape}"
        )
    h = state.hyper
    t = state.step + 1
    m = h.beta1 * state.m + (1.0 - h.beta1) * grads
    v = h.beta2 * state.v + (1.0 - h.beta2) * grads ** 2
    mhat = m / (1.0 - h.beta1 ** t)
    vhat = v / (1.0 - h.beta2 ** t)
    new_params = params - h.learning_rate * mhat / (np.sqrt(vhat) + h.eps)
    return new_params, AdamState(h, t, m, v)
