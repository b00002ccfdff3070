"""Dual-branch latent cross-attention encoder with a latent self-attention stack."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .nn import Module, MultiHeadAttention, SelfAttentionBlock, parameter
from .tensor import Tensor


class EmptyInput(ValueError):
    pass


@dataclass
class LatentState:
    Z: Tensor  # (B, K, d) or (K, d)
    branch: str = "fused"
    mask: np.ndarray | None = None  # only set when Z holds raw tokens (full self-attention)


def _batched(x):
    return x if x.ndim == 3 else x.reshape(1, *x.shape)


def cross_attend(z0, tokens, attn, mask=None):
    """``Z0 + attention(Z0, X)``; batch rows with fully masked X get ``Z0`` back.

    ``z0`` is ``(K, d)`` or ``(B, K, d)``; ``tokens`` is ``(N, d)`` or ``(B, N, d)``.
    """
    single = tokens.ndim == 2
    x = _batched(tokens)
    if x.shape[1] == 0:
        if single:
            raise EmptyInput("cross-attention over an empty token sequence")
        return z0 if z0.ndim == 3 else T.add(z0, np.zeros((x.shape[0],) + z0.shape))
    q = z0 if z0.ndim == 3 else T.add(z0, np.zeros((x.shape[0],) + z0.shape))
    out = q + attn(q, x, mask)
    return out[0] if single and z0.ndim == 2 else out


class PerceiverEncoder(Module):
    """Structural and temporal branches, each ``Z0 + CA(Z0, X)``, summed, then
    ``layers`` pre-norm self-attention blocks over the ``num_latents`` tokens.

    With ``full_self_attention`` the bottleneck is replaced by the same block
    stack over the concatenated input tokens.
    """

    def __init__(self, dim, rng, num_latents=16, layers=2, heads=4, ff_mult=2, dropout=0.0,
                 full_self_attention=False):
        if num_latents < 1:
            raise ValueError("num_latents must be >= 1")
        self.dim = dim
        self.num_latents = num_latents
        self.full_self_attention = full_self_attention
        self.latents_struct = parameter(rng.normal(0.0, 0.02, size=(num_latents, dim)))
        self.latents_temp = parameter(rng.normal(0.0, 0.02, size=(num_latents, dim)))
        self.cross_struct = MultiHeadAttention(dim, rng, heads=heads, dropout=dropout)
        self.cross_temp = MultiHeadAttention(dim, rng, heads=heads, dropout=dropout)
        self.blocks = [SelfAttentionBlock(dim, rng, heads=heads, ff_mult=ff_mult, dropout=dropout)
                       for _ in range(layers)]

    def fuse(self, struct, temp, struct_mask=None, temp_mask=None):
        zs = cross_attend(self.latents_struct, _batched(struct), self.cross_struct, struct_mask)
        b = zs.shape[0]
        t = _batched(temp)
        if t.shape[1] == 0:
            zt = T.add(self.latents_temp, np.zeros((b,) + self.latents_temp.shape))
        else:
            zt = cross_attend(self.latents_temp, t, self.cross_temp, temp_mask)
        return zs + zt

    def forward(self, struct, temp, struct_mask=None, temp_mask=None):
        struct, temp = _batched(struct), _batched(temp)
        if struct.shape[1] == 0:
            raise EmptyInput("structural branch must contain the seed")
        if self.full_self_attention:
            b = struct.shape[0]
            sm = np.ones(struct.shape[:2], bool) if struct_mask is None else struct_mask
            tm = np.ones(temp.shape[:2], bool) if temp_mask is None else temp_mask
            x = T.concat([struct, temp], axis=1) if temp.shape[1] else struct
            mask = np.concatenate([sm, tm], axis=1) if temp.shape[1] else sm
            for blk in self.blocks:
                x = blk(x, mask)
            return LatentState(x, "tokens", mask)
        z = self.fuse(struct, temp, struct_mask, temp_mask)
        for blk in self.blocks:
            z = blk(z)
        return LatentState(z, "fused")


def benchmark_complexity(sizes=(128, 256, 512, 1024), num_latents=16, layers=2, dim=128,
                         heads=4, batch=1, repeats=5, seed=0, temporal_fraction=0.5):
    """Wall time of one evaluation-mode encode per input size, for the latent
    bottleneck (CA) and for full self-attention over the tokens (SA).

    Returns ``(rows, exponents)``: rows are dicts with keys
    ``N_g, K, L, mode, mean_ms, std_ms``; exponents maps mode to the
    least-squares slope of log time against log N.
    """
    rng = np.random.default_rng(seed)
    arms = {
        "CA": PerceiverEncoder(dim, np.random.default_rng(seed), num_latents, layers, heads),
        "SA": PerceiverEncoder(dim, np.random.default_rng(seed), num_latents, layers, heads,
                               full_self_attention=True),
    }
    for enc in arms.values():
        enc.eval()
    rows = []
    for n in sizes:
        n_t = int(round(n * temporal_fraction))
        xs = Tensor(rng.normal(size=(batch, n - n_t, dim)))
        xt = Tensor(rng.normal(size=(batch, n_t, dim)))
        for mode, enc in arms.items():
            times = []
            with T.no_grad():
                enc(xs, xt)
                for _ in range(repeats):
                    t0 = time.perf_counter()
                    enc(xs, xt)
                    times.append((time.perf_counter() - t0) * 1e3)
            rows.append({"N_g": n, "K": num_latents, "L": layers, "mode": mode,
                         "mean_ms": float(np.mean(times)), "std_ms": float(np.std(times)),
                         "min_ms": float(np.min(times))})
    exponents = {}
    for mode in arms:
        pts = [(r["N_g"], r["min_ms"]) for r in rows if r["mode"] == mode]
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        exponents[mode] = float(np.polyfit(x, y, 1)[0])
    return rows, exponents
