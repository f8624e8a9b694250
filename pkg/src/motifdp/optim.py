"""Adam with bias correction over named parameter tensors."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class MissingGradientError(RuntimeError):
    """step() was called without a completed backward pass."""


class Adam:
    """Standard Adam: per-parameter first/second moments, bias-corrected.

    Parameters with no gradient buffer are treated as zero-gradient (their
    moments still decay). step() raises if no parameter has any gradient,
    which means backward() never ran. Gradients are cleared after the update.
    """

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        if all(p.grad is None for p in self.params.values()):
            raise MissingGradientError("no gradients present; run backward() first")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                g = 0.0
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * np.square(g)
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.grad = None
