"""Adam optimizer with bias correction and multiplicative step decay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus hyperparameters.

    The effective learning rate at step t is lr / (1 + decay * t), the
    step counter starting at 1 on the first update.
    """

    lr: float = 1e-4
    decay: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState) -> AdamState:
    """One in-place Adam update of every parameter array.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
    p <- p - lr_t * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """
    state.step += 1
    t = state.step
    lr_t = state.lr / (1.0 + state.decay * t)
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {key}")
        m = state.m.setdefault(key, np.zeros_like(p))
        v = state.v.setdefault(key, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr_t * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state
