"""Adam with bias correction, over named parameter Nodes."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .autodiff import Node


class AdamState:
    """Per-parameter first/second moment accumulators plus step count."""

    def __init__(self, learning_rate: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0
        self.moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}


def adam_step(params: Mapping[str, Node], state: AdamState) -> None:
    """One update over every parameter; missing grads count as zero."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        if name not in state.moments:
            state.moments[name] = (np.zeros_like(p.value), np.zeros_like(p.value))
        m, v = state.moments[name]
        g = p.grad if p.grad is not None else np.zeros_like(p.value)
        if g.shape != p.value.shape:
            raise ValueError(
                f"adam_step: grad shape {g.shape} vs param shape {p.value.shape} for {name}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.value -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
