"""Adam optimizer with bias correction and a step-halving schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ShapeError, Tensor

__all__ = ["AdamState", "adam_step", "halved_lr"]


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray | None], state: AdamState):
    """One Adam update on every parameter, in place.

    ``grads[name]`` of None means the parameter was disconnected from the
    loss this step and is treated as a zero gradient. Returns the mutated
    ``(params, state)`` pair.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise ShapeError(f"adam_step: gradient shape {g.shape} != param shape {p.data.shape} for {name}")
        if state.weight_decay:
            g = g + state.weight_decay * p.data
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        p.data = p.data - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def halved_lr(base_lr: float, epoch: int, n_epochs: int) -> float:
    """Learning rate halved at every fifth of the epoch budget."""
    period = max(1, n_epochs // 5)
    return base_lr * 0.5 ** (epoch // period)
