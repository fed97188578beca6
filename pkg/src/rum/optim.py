"""Adam with bias correction and L2 weight decay folded into the gradient."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    """First/second moment estimates per parameter plus the step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
              weight_decay=0.0):
    """One Adam update, in place on the parameter arrays.

    `params` maps names to arrays (or Tensors), `grads` maps the same names
    to gradient arrays. Weight decay is added to the gradient as an L2 term.
    """
    state.t += 1
    t = state.t
    for name, p in params.items():
        arr = p.data if isinstance(p, Tensor) else p
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != arr.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {arr.shape} for {name!r}")
        if weight_decay:
            g = g + weight_decay * arr
        if name not in state.m:
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = state.m[name] / (1 - beta1 ** t)
        v_hat = state.v[name] / (1 - beta2 ** t)
        arr -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Convenience wrapper driving `adam_step` from Tensor .grad slots."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamState()

    def step(self):
        grads = {}
        for name, p in self.params.items():
            grads[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
        adam_step(self.params, grads, self.state, lr=self.lr, beta1=self.beta1,
                  beta2=self.beta2, eps=self.eps, weight_decay=self.weight_decay)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
