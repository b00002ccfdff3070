"""Node featurization: multi-modal attribute encoding plus positional encodings."""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .nn import Embedding, LayerNorm, Linear, Module, parameter
from .tensor import Tensor

HOUR = 3600.0
_TIME_PERIODS = (86400.0, 7 * 86400.0, 30 * 86400.0, 365 * 86400.0)
MISSING = "∅"


class UnknownCategory(KeyError):
    pass


class EmptyText(ValueError):
    pass


_TOKEN = re.compile(r"[a-z0-9]+")


class TextEmbedder:
    """Frozen hashed bag-of-tokens embedding.

    Each token maps to a fixed Gaussian vector seeded by a stable hash of the
    token; a text is the unit-normalized mean of its token vectors.
    """

    frozen = True

    def __init__(self, dim, seed=0):
        self.dim = dim
        self.seed = seed
        self._cache = {}

    def token_vector(self, token):
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(f"{self.seed}:{token}".encode(), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.dim)
            self._cache[token] = vec
        return vec

    def __call__(self, text):
        tokens = _TOKEN.findall(str(text).lower())
        if not tokens:
            raise EmptyText(repr(text))
        v = np.mean([self.token_vector(t) for t in tokens], axis=0)
        return v / np.linalg.norm(v)


def embed_text(text, embedder):
    return embedder(text)


@dataclass(frozen=True)
class FeatureConfig:
    hidden_dim: int = 128
    numerical_dim: int = 8
    categorical_dim: int = 16
    text_dim: int = 16
    text_hash_dim: int = 32
    timestamp_dim: int = 8
    type_dim: int = 32
    cent_dim: int = 16
    hop_dim: int = 16
    time_dim: int = 64
    hops: int = 2

    def __post_init__(self):
        for name in ("hidden_dim", "numerical_dim", "categorical_dim", "text_dim",
                     "text_hash_dim", "timestamp_dim", "type_dim", "cent_dim", "hop_dim",
                     "time_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def pe_concat_dim(self):
        return self.type_dim + self.cent_dim + self.hop_dim + self.time_dim

    @property
    def hop_vocab(self):
        return self.hops + 2

    @property
    def sentinel_hop(self):
        return self.hops + 1


class Vocabulary:
    """Category -> index, with index 0 reserved for the missing marker."""

    def __init__(self, values=()):
        self.index = {MISSING: 0}
        self.frozen = False
        for v in values:
            self.lookup(v)

    def __len__(self):
        return len(self.index)

    def lookup(self, value):
        key = MISSING if value is None else str(value)
        idx = self.index.get(key)
        if idx is None:
            if self.frozen:
                raise UnknownCategory(key)
            idx = self.index[key] = len(self.index)
        return idx


def timestamp_features(t):
    """sin/cos at daily, weekly, monthly and yearly periods; zeros for NaN."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros(t.shape + (2 * len(_TIME_PERIODS),))
    ok = ~np.isnan(t)
    for i, p in enumerate(_TIME_PERIODS):
        ang = 2 * math.pi * t[ok] / p
        out[ok, 2 * i] = np.sin(ang)
        out[ok, 2 * i + 1] = np.cos(ang)
    return out


def relative_time(node_time, seed_time):
    """sign(dt) * log1p(|dt| / 1 hour) with dt = node_time - seed_time."""
    dt = np.asarray(node_time, dtype=np.float64) - np.asarray(seed_time, dtype=np.float64)
    return np.sign(dt) * np.log1p(np.abs(dt) / HOUR)


def compute_centrality(graph, damping=0.85, max_iter=200, tol=1e-12):
    """Undirected degree and PageRank over the type-erased graph."""
    n = graph.num_nodes
    if n == 0:
        return np.zeros(0), np.zeros(0)
    rows = np.concatenate([graph.edge_src, graph.edge_dst])
    cols = np.concatenate([graph.edge_dst, graph.edge_src])
    adj = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    degree = np.bincount(rows, minlength=n).astype(np.float64)
    out_w = np.asarray(adj.sum(axis=1)).ravel()
    dangling = out_w == 0
    inv = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, out_w))
    trans = sp.diags(inv) @ adj
    transT = trans.T.tocsr()
    pr = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = damping * (transT @ pr) + (damping * pr[dangling].sum() + 1.0 - damping) / n
        delta = np.abs(nxt - pr).sum()
        pr = nxt
        if delta < tol:
            break
    return degree, pr / pr.sum()


def _standardize(x):
    x = np.asarray(x, dtype=np.float64)
    sd = x.std()
    return (x - x.mean()) / (sd if sd > 0 else 1.0)


class TableFeatures:
    """Preprocessed attribute arrays for one node type."""

    def __init__(self, graph, ntype, text_embedder, text_hash_dim):
        schema = graph.schema
        cols = schema.attribute_columns(ntype)
        attrs = graph.attributes.get(ntype, {})
        n = graph.num_nodes_of(ntype)
        self.ntype = ntype
        self.numerical = [c for c, m in cols if m == "numerical"]
        self.categorical = [c for c, m in cols if m == "categorical"]
        self.text = [c for c, m in cols if m == "text"]
        extra_ts = [c for c, m in cols if m == "timestamp"]
        self.has_time = schema.table(ntype).timestamp_column is not None or bool(extra_ts)
        self.num_mean = np.zeros(len(self.numerical))
        self.num_std = np.ones(len(self.numerical))
        num = np.zeros((n, len(self.numerical)))
        for j, c in enumerate(self.numerical):
            v = np.asarray(attrs.get(c, [math.nan] * n), dtype=np.float64)
            ok = ~np.isnan(v)
            mu = v[ok].mean() if ok.any() else 0.0
            sd = v[ok].std() if ok.sum() > 1 else 1.0
            self.num_mean[j] = mu
            self.num_std[j] = sd if sd > 0 else 1.0
            num[:, j] = np.where(ok, (v - mu) / self.num_std[j], 0.0)
        self.num = num
        self.vocabs = []
        cat = np.zeros((n, len(self.categorical)), dtype=np.int64)
        for j, c in enumerate(self.categorical):
            vocab = Vocabulary()
            cat[:, j] = [vocab.lookup(v) for v in attrs.get(c, [None] * n)]
            self.vocabs.append(vocab)
        self.cat = cat
        self.text_embedder = text_embedder
        self.text_hash_dim = text_hash_dim
        txt = np.zeros((n, len(self.text), text_hash_dim))
        for j, c in enumerate(self.text):
            for i, v in enumerate(attrs.get(c, [None] * n)):
                txt[i, j] = self._embed(v)
        self.txt = txt
        off = int(graph.node_offsets[graph.node_types.index(ntype)])
        self.time = timestamp_features(graph.node_time[off:off + n]) if self.has_time else np.zeros((n, 0))
        self.n = n

    def _embed(self, value):
        if value is None:
            return np.zeros(self.text_hash_dim)
        try:
            return self.text_embedder(value)
        except EmptyText:
            return np.zeros(self.text_hash_dim)

    def freeze(self):
        for v in self.vocabs:
            v.frozen = True

    def row_from_record(self, node):
        """Feature arrays (1-row) for an arbitrary NodeRecord of this type."""
        a = node.raw_attributes
        num = np.zeros((1, len(self.numerical)))
        for j, c in enumerate(self.numerical):
            v = a.get(c)
            v = math.nan if v is None else float(v)
            num[0, j] = 0.0 if math.isnan(v) else (v - self.num_mean[j]) / self.num_std[j]
        cat = np.array([[vocab.lookup(a.get(c)) for c, vocab in zip(self.categorical, self.vocabs)]],
                       dtype=np.int64).reshape(1, len(self.categorical))
        txt = np.stack([self._embed(a.get(c)) for c in self.text])[None] if self.text else \
            np.zeros((1, 0, self.text_hash_dim))
        t = math.nan if node.timestamp is None else node.timestamp
        time = timestamp_features(np.array([t])) if self.has_time else np.zeros((1, 0))
        return num, cat, txt, time


class FeatureStore:
    """Per-graph precomputed inputs: attribute arrays and standardized centrality."""

    def __init__(self, graph, config, text_embedder=None):
        self.graph = graph
        self.config = config
        self.text_embedder = text_embedder or TextEmbedder(config.text_hash_dim, seed=17)
        self.tables = {t: TableFeatures(graph, t, self.text_embedder, config.text_hash_dim)
                       for t in graph.node_types}
        degree, pagerank = compute_centrality(graph)
        self.degree, self.pagerank = degree, pagerank
        if graph.num_nodes:
            self.centrality = np.stack([_standardize(degree), _standardize(pagerank)], axis=1)
        else:
            self.centrality = np.zeros((0, 2))

    def freeze(self):
        for t in self.tables.values():
            t.freeze()


class AttributeEncoder(Module):
    """Per-modality encoders, concatenation, then a residual projection to ``d``."""

    def __init__(self, table, config, rng):
        d = config.hidden_dim
        self.n_num = len(table.numerical)
        self.num_w = parameter(rng.normal(0.0, 1.0, size=(self.n_num, config.numerical_dim)))
        self.num_b = parameter(np.zeros((self.n_num, config.numerical_dim)))
        self.cat = [Embedding(len(v) + 0, config.categorical_dim, rng, std=1.0) for v in table.vocabs]
        self.txt = [Linear(config.text_hash_dim, config.text_dim, rng) for _ in table.text]
        self.has_time = table.has_time
        self.time = Linear(table.time.shape[1], config.timestamp_dim, rng) if table.has_time else None
        n_in = (self.n_num * config.numerical_dim + len(table.vocabs) * config.categorical_dim
                + len(table.text) * config.text_dim + (config.timestamp_dim if table.has_time else 0))
        self.n_in = n_in
        if n_in:
            self.proj = Linear(n_in, d, rng)
            self.norm = LayerNorm(d)
            self.fc1 = Linear(d, d, rng)
            self.fc2 = Linear(d, d, rng)
        else:
            self.const = parameter(rng.normal(0.0, 0.02, size=(1, d)))
        self.dim = d

    def grow(self, table, rng):
        """Extend categorical tables after vocabulary growth."""
        for emb, vocab in zip(self.cat, table.vocabs):
            extra = len(vocab) - emb.weight.shape[0]
            if extra > 0:
                emb.weight.data = np.vstack([emb.weight.data,
                                             rng.normal(0.0, 1.0, size=(extra, emb.weight.shape[1]))])

    def forward(self, num, cat, txt, time):
        n = num.shape[0]
        if not self.n_in:
            return T.mul(self.const, np.ones((n, 1)))
        parts = []
        if self.n_num:
            h = T.add(T.mul(Tensor(num[:, :, None]), self.num_w), self.num_b)
            parts.append(h.reshape(n, -1))
        for j, emb in enumerate(self.cat):
            parts.append(emb(cat[:, j]))
        for j, lin in enumerate(self.txt):
            parts.append(lin(Tensor(txt[:, j])))
        if self.has_time:
            parts.append(self.time(Tensor(time)))
        h = self.proj(T.concat(parts, axis=-1) if len(parts) > 1 else parts[0])
        return h + self.fc2(T.gelu(self.fc1(self.norm(h))))


class PositionalEncoder(Module):
    """W_PE [e_type | e_cent | e_hop | e_time]."""

    def __init__(self, n_types, config, rng):
        self.type_emb = Embedding(n_types, config.type_dim, rng, std=1.0)
        self.cent = Linear(2, config.cent_dim, rng)
        self.hop_emb = Embedding(config.hop_vocab, config.hop_dim, rng, std=1.0)
        self.time = Linear(1, config.time_dim, rng)
        self.no_time = parameter(rng.normal(0.0, 1.0, size=(config.time_dim,)))
        self.proj = Linear(config.pe_concat_dim, config.hidden_dim, rng)

    def parts(self, type_idx, centrality, hop_idx, rel_time, has_time):
        e_type = self.type_emb(type_idx)
        e_cent = self.cent(Tensor(centrality))
        e_hop = self.hop_emb(hop_idx)
        has = has_time.astype(np.float64)[:, None]
        e_time = T.add(T.mul(self.time(Tensor(np.where(has_time, rel_time, 0.0)[:, None])), has),
                       T.mul(self.no_time, 1.0 - has))
        return e_type, e_cent, e_hop, e_time

    def forward(self, type_idx, centrality, hop_idx, rel_time, has_time):
        return self.proj(T.concat(self.parts(type_idx, centrality, hop_idx, rel_time, has_time), axis=-1))


@dataclass
class TokenSequence:
    tokens: Tensor  # (N, d)
    node_ids: np.ndarray
    branch: str


@dataclass
class TokenBatch:
    """Padded tokens for a batch: ``tokens`` (B, N, d), ``mask`` (B, N)."""
    tokens: Tensor
    mask: np.ndarray
    node_ids: list


class Featurizer(Module):
    def __init__(self, store, rng):
        self.store = store
        self.config = store.config
        self.encoders = {t: AttributeEncoder(store.tables[t], store.config, rng)
                         for t in store.graph.node_types}
        self.pe = PositionalEncoder(len(store.graph.node_types), store.config, rng)
        self._rng = rng

    def freeze_vocab(self):
        self.store.freeze()

    def encode_attributes(self, node):
        """Attribute embedding ``(d,)`` for one NodeRecord."""
        table = self.store.tables[node.type]
        row = table.row_from_record(node)
        self.encoders[node.type].grow(table, self._rng)
        return self.encoders[node.type](*row)[0]

    def encode_nodes(self, node_ids):
        """Attribute embeddings for sorted unique node ids, ``(len(node_ids), d)``."""
        g = self.store.graph
        types = g.node_type[node_ids]
        blocks = []
        for ti in np.unique(types):
            ntype = g.node_types[ti]
            local = node_ids[types == ti] - g.node_offsets[ti]
            tab = self.store.tables[ntype]
            blocks.append(self.encoders[ntype](tab.num[local], tab.cat[local], tab.txt[local],
                                               tab.time[local]))
        return T.concat(blocks, axis=0) if len(blocks) > 1 else blocks[0]

    def positional(self, node_ids, hops, seed_times):
        g = self.store.graph
        nt = g.node_time[node_ids]
        has = ~np.isnan(nt)
        rel = np.where(has, relative_time(np.where(has, nt, 0.0), seed_times), 0.0)
        return self.pe(g.node_type[node_ids], self.store.centrality[node_ids], hops, rel, has)

    def positional_encoding(self, node, seed, hop):
        """PE vector ``(d,)`` for one node id relative to ``seed`` (a SeedQuery)."""
        ids = np.array([int(node)])
        return self.positional(ids, np.array([int(hop)]), np.array([float(seed.seed_time)]))[0]

    def tokenize_batch(self, contexts, seed_times):
        """Structural and temporal padded token batches for a list of contexts."""
        sentinel = self.config.sentinel_hop
        s_ids = [c.structural for c in contexts]
        t_ids = [c.temporal for c in contexts]
        s_len = np.array([len(x) for x in s_ids])
        t_len = np.array([len(x) for x in t_ids])
        all_ids = np.concatenate(s_ids + t_ids).astype(np.int64)
        all_hops = np.concatenate([c.hops for c in contexts]
                                  + [np.full(n, sentinel, dtype=np.int64) for n in t_len]).astype(np.int64)
        seeds = np.asarray(seed_times, dtype=np.float64)
        all_seed_t = np.concatenate([np.repeat(seeds, s_len), np.repeat(seeds, t_len)])
        d = self.config.hidden_dim
        if all_ids.size:
            uniq, inverse = np.unique(all_ids, return_inverse=True)
            attr = T.take_rows(self.encode_nodes(uniq), inverse)
            flat = attr + self.positional(all_ids, all_hops, all_seed_t)
        else:
            flat = Tensor(np.zeros((0, d)))
        flat = T.concat([flat, Tensor(np.zeros((1, d)))], axis=0)
        dummy = all_ids.size
        n_s = int(s_len.sum())

        def pad(lengths, start):
            b = len(lengths)
            width = int(lengths.max()) if b and lengths.size else 0
            idx = np.full((b, width), dummy, dtype=np.int64)
            mask = np.zeros((b, width), dtype=bool)
            pos = start
            for i, n in enumerate(lengths):
                idx[i, :n] = np.arange(pos, pos + n)
                mask[i, :n] = True
                pos += n
            return T.take_rows(flat, idx), mask

        xs, ms = pad(s_len, 0)
        xt, mt = pad(t_len, n_s)
        return TokenBatch(xs, ms, s_ids), TokenBatch(xt, mt, t_ids)

    def tokenize(self, context, seed):
        s, t = self.tokenize_batch([context], [seed.seed_time])
        return (TokenSequence(s.tokens[0], context.structural, "structural"),
                TokenSequence(t.tokens[0], context.temporal, "temporal"))
