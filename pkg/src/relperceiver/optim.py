"""AdamW with decoupled weight decay and a warmup + cosine learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def warmup_cosine(step, base_lr, warmup_steps, total_steps):
    """Learning rate at 0-indexed ``step``.

    Linear ramp ``base * (step + 1) / warmup`` for the first ``warmup_steps``
    steps, then cosine decay reaching 0 at ``total_steps``.
    """
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * (step + 1) / warmup_steps
    span = max(total_steps - warmup_steps, 1)
    progress = min(max(step - warmup_steps, 0) / span, 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class OptimizerState:
    lr: float = 1e-3
    weight_decay: float = 1e-5
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    warmup_steps: int = 10
    total_steps: int = 1000
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class AdamW:
    def __init__(self, params, lr=1e-3, weight_decay=1e-5, betas=(0.9, 0.999), eps=1e-8,
                 warmup_steps=10, total_steps=1000):
        self.params = dict(params)
        self.state = OptimizerState(lr, weight_decay, tuple(betas), eps, warmup_steps, total_steps)
        for k, p in self.params.items():
            self.state.m[k] = np.zeros_like(p.data)
            self.state.v[k] = np.zeros_like(p.data)

    def current_lr(self):
        s = self.state
        return warmup_cosine(s.step, s.lr, s.warmup_steps, s.total_steps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        s = self.state
        lr = self.current_lr()
        b1, b2 = s.betas
        t = s.step + 1
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for k, p in self.params.items():
            g = p.grad
            # decay first, independent of the moments
            if s.weight_decay:
                p.data *= 1.0 - lr * s.weight_decay
            if g is None:
                continue
            m, v = s.m[k], s.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + s.eps)
        s.step = t
        return lr
