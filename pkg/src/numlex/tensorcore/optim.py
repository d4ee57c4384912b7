from __future__ import annotations

import numpy as np

from numlex.errors import MissingGradient
from numlex.tensorcore.params import ParamSet


def _grads(params: ParamSet):
    for name, p in params.items():
        if p.grad is None:
            raise MissingGradient(f"parameter {name!r} has no gradient; call zero_grad() before backward")
        yield name, p


def clip_grad_norm(params: ParamSet, max_norm: float) -> float:
    total = float(np.sqrt(sum(float((p.grad * p.grad).sum()) for _, p in _grads(params))))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params.values():
            p.grad = p.grad * scale
    return total


class SGD:
    def __init__(self, params: ParamSet, lr=0.1):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for _, p in _grads(self.params):
            p.data = p.data - self.lr * p.grad


class Adam:
    """Adam with bias correction; moment buffers live here, not on the parameters."""

    def __init__(self, params: ParamSet, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in _grads(self.params):
            g = p.grad
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(kind: str, params: ParamSet, lr: float, **kwargs):
    if kind == "sgd":
        return SGD(params, lr)
    if kind == "adam":
        return Adam(params, lr, **kwargs)
    raise ValueError(f"unknown optimizer {kind!r}")
