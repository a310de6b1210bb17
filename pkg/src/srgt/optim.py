"""Learnable parameters and a decoupled-weight-decay Adam optimizer."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor


class Parameter(Tensor):
    """A named tensor with gradient and first/second moment buffers."""

    __slots__ = ("name", "moment1", "moment2", "step_count")

    def __init__(self, data, name):
        super().__init__(data, requires_grad=True)
        self.requires_grad = True  # parameters track grads even under no_grad init
        self.name = name
        self.moment1 = np.zeros_like(self.data)
        self.moment2 = np.zeros_like(self.data)
        self.step_count = 0


def adamw_step(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """Bias-corrected moment update, then decoupled weight decay. Grads untouched."""
    for p in params:
        if p.grad is None:
            continue
        p.step_count += 1
        p.moment1 = beta1 * p.moment1 + (1 - beta1) * p.grad
        p.moment2 = beta2 * p.moment2 + (1 - beta2) * p.grad ** 2
        m_hat = p.moment1 / (1 - beta1 ** p.step_count)
        v_hat = p.moment2 / (1 - beta2 ** p.step_count)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        if weight_decay:
            p.data -= lr * weight_decay * p.data


class AdamW:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        adamw_step(self.params, self.lr, self.beta1, self.beta2, self.eps,
                   self.weight_decay)
