"""Adam optimizer with bias correction and global-norm gradient clipping."""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .autograd import Node


def clip_grad_norm(params: Iterable[Node], max_norm: float) -> float:
    """Rescale gradients in place so their global L2 norm is at most max_norm.

    Returns the pre-clip norm.  Parameters without gradients count as zero.
    """
    params = list(params)
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm


class Adam:
    """Standard Adam over a fixed parameter list.

    Moments are kept per parameter; `step` applies one bias-corrected
    update from the currently accumulated gradients (clipped to
    `clip_norm` first unless disabled) and `zero_grad` resets them.
    """

    def __init__(self, params: Iterable[Node], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 clip_norm: Optional[float] = 5.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        if self.clip_norm is not None:
            clip_grad_norm(self.params, self.clip_norm)
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad if p.grad is not None else 0.0
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / b1c
            v_hat = self.v[i] / b2c
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
