"""Parameterized layers built on :mod:`relperceiver.tensor`."""
from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .tensor import Tensor


class EmptyKeySet(ValueError):
    pass


def parameter(data, name=None):
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True, name=name)


class Module:
    """Minimal container: parameters are ``Tensor`` attributes with
    ``requires_grad``; child modules and lists of modules are traversed."""

    training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=""):
        out = {}
        for key, val in vars(self).items():
            full = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[full] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(full + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{full}.{i}."))
            elif isinstance(val, dict):
                for k, item in val.items():
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{full}.{k}."))
        return out

    def modules(self):
        yield self
        for val in vars(self).values():
            if isinstance(val, Module):
                yield from val.modules()
            elif isinstance(val, (list, tuple)):
                for item in val:
                    if isinstance(item, Module):
                        yield from item.modules()
            elif isinstance(val, dict):
                for item in val.values():
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode=True):
        for m in self.modules():
            m.training = mode
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.named_parameters().values():
            p.grad = None

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state):
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}: {arr.shape} vs {p.data.shape}")
            p.data = arr.copy()


class Linear(Module):
    """``y = x @ W + b`` with ``W`` of shape (in, out)."""

    def __init__(self, n_in, n_out, rng, bias=True, std=None):
        std = 1.0 / math.sqrt(max(n_in, 1)) if std is None else std
        self.weight = parameter(rng.normal(0.0, std, size=(n_in, n_out)))
        self.bias = parameter(np.zeros(n_out)) if bias else None

    def forward(self, x):
        y = T.matmul(x, self.weight)
        return y + self.bias if self.bias is not None else y


class Embedding(Module):
    def __init__(self, n, dim, rng, std=0.02):
        self.weight = parameter(rng.normal(0.0, std, size=(n, dim)))

    def forward(self, idx):
        return T.take_rows(self.weight, idx)


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        self.gamma = parameter(np.ones(dim))
        self.beta = parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x):
        return T.layer_norm(x, self.gamma, self.beta, self.eps)


class Dropout(Module):
    def __init__(self, rate, rng):
        self.rate = rate
        self.rng = rng

    def forward(self, x):
        return T.dropout(x, self.rate, self.rng, self.training)


class MultiHeadAttention(Module):
    """softmax((q Wq)(kv Wk)^T / sqrt(d_head)) (kv Wv), per head, then Wo.

    Inputs are ``(batch, n, d)``; ``key_mask`` is a boolean ``(batch, n_kv)``
    array.  A query row whose keys are all masked yields a zero output.
    """

    def __init__(self, dim, rng, heads=4, d_k=None, dropout=0.0):
        d_k = dim if d_k is None else d_k
        if d_k % heads:
            raise ValueError(f"d_k={d_k} not divisible by heads={heads}")
        self.heads = heads
        self.d_k = d_k
        self.q_proj = Linear(dim, d_k, rng, bias=False)
        self.k_proj = Linear(dim, d_k, rng, bias=False)
        self.v_proj = Linear(dim, d_k, rng, bias=False)
        self.o_proj = Linear(d_k, dim, rng, bias=False)
        self.drop = Dropout(dropout, rng)

    def weights(self, q_src, kv_src, key_mask=None):
        """Attention probabilities ``(batch, heads, n_q, n_kv)``."""
        q, k, _ = self._project(q_src, kv_src)
        return self._probs(q, k, key_mask)

    def _project(self, q_src, kv_src):
        b, nq, _ = q_src.shape
        nk = kv_src.shape[1]
        h, dh = self.heads, self.d_k // self.heads
        q = self.q_proj(q_src).reshape(b, nq, h, dh).transpose(0, 2, 1, 3)
        k = self.k_proj(kv_src).reshape(b, nk, h, dh).transpose(0, 2, 1, 3)
        v = self.v_proj(kv_src).reshape(b, nk, h, dh).transpose(0, 2, 1, 3)
        return q, k, v

    def _probs(self, q, k, key_mask):
        scale = 1.0 / math.sqrt(self.d_k // self.heads)
        scores = T.matmul(q, k.transpose(0, 1, 3, 2)) * scale
        mask = None if key_mask is None else key_mask[:, None, None, :]
        return T.softmax(scores, axis=-1, mask=mask)

    def forward(self, q_src, kv_src, key_mask=None):
        if kv_src.shape[1] == 0:
            raise EmptyKeySet("attention over zero keys")
        b, nq, _ = q_src.shape
        q, k, v = self._project(q_src, kv_src)
        p = self.drop(self._probs(q, k, key_mask))
        out = T.matmul(p, v).transpose(0, 2, 1, 3).reshape(b, nq, self.d_k)
        return self.o_proj(out)


class FeedForward(Module):
    def __init__(self, dim, rng, mult=2, dropout=0.0):
        self.fc1 = Linear(dim, dim * mult, rng)
        self.fc2 = Linear(dim * mult, dim, rng)
        self.drop = Dropout(dropout, rng)

    def forward(self, x):
        return self.drop(self.fc2(T.gelu(self.fc1(x))))


class SelfAttentionBlock(Module):
    """Pre-norm transformer block: x + MHA(LN x); x + FF(LN x)."""

    def __init__(self, dim, rng, heads=4, ff_mult=2, dropout=0.0):
        self.norm1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, rng, heads=heads, dropout=dropout)
        self.norm2 = LayerNorm(dim)
        self.ff = FeedForward(dim, rng, mult=ff_mult, dropout=dropout)
        self.drop = Dropout(dropout, rng)

    def forward(self, x, key_mask=None):
        h = self.norm1(x)
        x = x + self.drop(self.attn(h, h, key_mask))
        return x + self.ff(self.norm2(x))
