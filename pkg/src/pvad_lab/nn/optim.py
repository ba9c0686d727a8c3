"""Adam with bias correction, plus global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_adam(params: ModelParams, lr: float, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    for name, value in params.values.items():
        if params.trainable[name]:
            state.m[name] = np.zeros_like(value)
            state.v[name] = np.zeros_like(value)
    return state


def adam_step(params: ModelParams, state: AdamState) -> None:
    """One update from the gradients currently held by `params`.

    Frozen parameters are left untouched.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for name, m in state.m.items():
        g = params.grads[name]
        v = state.v[name]
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        m_hat = m / bias1
        v_hat = v / bias2
        params.values[name] -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def global_grad_norm(params: ModelParams) -> float:
    total = 0.0
    for name, g in params.grads.items():
        if params.trainable[name]:
            total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_gradients(params: ModelParams, max_norm: float) -> float:
    """Scale trainable gradients so their global norm is <= max_norm."""
    norm = global_grad_norm(params)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for name, g in params.grads.items():
            if params.trainable[name]:
                g *= scale
    return norm
