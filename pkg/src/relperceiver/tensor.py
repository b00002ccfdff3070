"""Tape-based reverse-mode autodiff over float64 numpy arrays.

Every op returns a new :class:`Tensor` that records its parents and a
closure computing vector-Jacobian products.  ``backward`` walks the tape in
reverse topological order.  Arrays may have any rank; batched attention
uses rank-4 tensors ``(batch, heads, queries, keys)``.
"""
from __future__ import annotations

import contextlib
import math
import warnings

import numpy as np

_GRAD_ENABLED = True


class DisconnectedParameterWarning(UserWarning):
    """A parameter passed to ``backward`` is not reachable from the loss."""


@contextlib.contextmanager
def no_grad():
    """Disable tape recording (evaluation)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def numpy(self):
        return self.data

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)

    def transpose(self, *axes):
        return transpose(self, axes if axes else None)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if _GRAD_ENABLED:
        live = tuple(p for p in parents if p.requires_grad)
        if live:
            out.requires_grad = True
            out._parents = live
            out._backward = backward
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def backward(loss, params=None):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    When ``params`` is given, any parameter the loss does not depend on gets
    a zero gradient and a :class:`DisconnectedParameterWarning`.
    """
    if loss.data.size != 1:
        raise ValueError("backward expects a scalar loss")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            _accum(node, g)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
    if params is not None:
        for name, p in (params.items() if isinstance(params, dict) else enumerate(params)):
            if id(p) not in seen:
                warnings.warn(f"parameter {name!r} is not connected to the loss",
                              DisconnectedParameterWarning, stacklevel=2)
                p.grad = np.zeros_like(p.data)


# The _backward closures return one gradient per *live* parent, in order.
def _live_grads(parents, grads):
    return tuple(g for p, g in zip(parents, grads) if p.requires_grad)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def bw(g):
        return _live_grads((a, b), (_unbroadcast(g, a.shape) if a.requires_grad else None,
                                    _unbroadcast(g, b.shape) if b.requires_grad else None))
    return _make(out, (a, b), bw)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def bw(g):
        return _live_grads((a, b), (_unbroadcast(g, a.shape) if a.requires_grad else None,
                                    _unbroadcast(-g, b.shape) if b.requires_grad else None))
    return _make(out, (a, b), bw)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def bw(g):
        return _live_grads((a, b), (
            _unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
            _unbroadcast(g * a.data, b.shape) if b.requires_grad else None))
    return _make(out, (a, b), bw)


def matmul(a, b):
    """``a @ b`` with numpy broadcasting over leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    out = a.data @ b.data

    def bw(g):
        ga = gb = None
        # promote vectors the way numpy does, then drop the added axis
        ad = a.data[None, :] if a.ndim == 1 else a.data
        bd = b.data[:, None] if b.ndim == 1 else b.data
        g2 = g
        if a.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if b.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        if a.requires_grad:
            ga = g2 @ np.swapaxes(bd, -1, -2)
            ga = _unbroadcast(ga[..., 0, :] if a.ndim == 1 else ga, a.shape)
        if b.requires_grad:
            if bd.ndim == 2 and ad.ndim > 2:
                gb = ad.reshape(-1, ad.shape[-1]).T @ g2.reshape(-1, g2.shape[-1])
            else:
                gb = np.swapaxes(ad, -1, -2) @ g2
            gb = _unbroadcast(gb[..., :, 0] if b.ndim == 1 else gb, b.shape)
        return _live_grads((a, b), (ga, gb))
    return _make(out, (a, b), bw)


def tsum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)
    return _make(out, (a,), bw)


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    out = a.data.reshape(shape)
    return _make(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes=None):
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)
    return _make(out, (a,), lambda g: (np.transpose(g, inv),))


def getitem(a, index):
    out = a.data[index]

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)
    return _make(out, (a,), bw)


def take_rows(table, idx):
    """Gather rows of a 2-D table; ``idx`` may have any shape."""
    idx = np.asarray(idx, dtype=np.int64)
    out = table.data[idx]

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx.ravel(), g.reshape(-1, table.shape[1]))
        return (full,)
    return _make(out, (table,), bw)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        parts = np.split(g, sizes, axis=axis)
        return tuple(p for t, p in zip(tensors, parts) if t.requires_grad)
    return _make(out, tensors, bw)


def abs_(a):
    out = np.abs(a.data)
    return _make(out, (a,), lambda g: (g * np.sign(a.data),))


def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def sin(a):
    out = np.sin(a.data)
    return _make(out, (a,), lambda g: (g * np.cos(a.data),))


def relu(a):
    out = np.maximum(a.data, 0.0)
    return _make(out, (a,), lambda g: (g * (a.data > 0),))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a):
    """tanh approximation of GELU."""
    x = a.data
    x2 = x * x  # x ** 3 goes through pow() and dominates small encodes
    inner = _GELU_C * (x + 0.044715 * x2 * x)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def bw(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)
    return _make(out, (a,), bw)


def softmax(a, axis=-1, mask=None):
    """Softmax along ``axis``; entries where ``mask`` is False get weight 0.

    A row with no unmasked entry returns all zeros instead of NaN.
    """
    x = a.data
    if mask is not None:
        mask = np.broadcast_to(mask, x.shape)
        x = np.where(mask, x, -np.inf)
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e.sum(axis=axis, keepdims=True)
    p = e / np.where(s == 0.0, 1.0, s)

    def bw(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)
    return _make(p, (a,), bw)


def log_softmax(a, axis=-1):
    x = a.data
    arg = np.expand_dims(np.argmax(x, axis=axis), axis)
    shifted = x - np.take_along_axis(x, arg, axis=axis)
    e = np.exp(shifted)
    # leave the max term out of the sum so near-certain rows keep their precision
    np.put_along_axis(e, arg, 0.0, axis=axis)
    out = shifted - np.log1p(e.sum(axis=axis, keepdims=True))

    def bw(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)
    return _make(out, (a,), bw)


def layer_norm(a, gamma, beta, eps=1e-5):
    """Normalize the last axis, then scale and shift."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bw(g):
        gx = gg = gb = None
        if gamma.requires_grad:
            gg = (g * xhat).reshape(-1, x.shape[-1]).sum(axis=0)
        if beta.requires_grad:
            gb = g.reshape(-1, x.shape[-1]).sum(axis=0)
        if a.requires_grad:
            gh = g * gamma.data
            n = x.shape[-1]
            gx = inv / n * (n * gh - gh.sum(axis=-1, keepdims=True)
                            - xhat * (gh * xhat).sum(axis=-1, keepdims=True))
        return _live_grads((a, gamma, beta), (gx, gg, gb))
    return _make(out, (a, gamma, beta), bw)


def dropout(a, rate, rng, training):
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not training or rate <= 0.0:
        return a
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, keep)
