"""Task-conditioned decoding against text-embedded labels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .features import TextEmbedder
from .nn import FeedForward, LayerNorm, Linear, Module, MultiHeadAttention, parameter
from .tensor import Tensor

TASK_KINDS = ("binary", "multiclass", "regression", "ranking")


class LabelSetEmpty(ValueError):
    pass


class TargetMismatch(ValueError):
    pass


class IndexOutOfRange(IndexError):
    pass


@dataclass
class TaskSpec:
    task_id: str
    kind: str
    description: str
    labels: tuple = ()
    description_embedding: np.ndarray | None = field(default=None, repr=False)
    label_embeddings: np.ndarray | None = field(default=None, repr=False)  # (m, d)

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}")
        self.labels = tuple(self.labels)

    def validate(self):
        m = len(self.labels)
        if self.kind == "regression" and m:
            raise ValueError(f"regression task {self.task_id} must not declare labels")
        if self.kind != "regression" and m < 2:
            raise ValueError(f"{self.kind} task {self.task_id} needs >= 2 labels, has {m}")
        return self

    @property
    def num_labels(self):
        return len(self.labels)

    @classmethod
    def create(cls, task_id, kind, description, labels, embedder):
        spec = cls(task_id, kind, description, tuple(labels))
        spec.description_embedding = embedder(description)
        if spec.labels:
            spec.label_embeddings = np.stack([embedder(l) for l in spec.labels])
        else:
            spec.label_embeddings = np.zeros((0, embedder.dim))
        return spec


@dataclass
class Prediction:
    z: Tensor  # (B, d)
    logits: Tensor | None = None  # (B, m)
    value: Tensor | None = None  # (B,)

    @property
    def probabilities(self):
        if self.logits is None:
            return None
        return T.softmax(self.logits, axis=-1).data

    @property
    def outputs(self):
        return self.logits.data if self.logits is not None else self.value.data


def build_query(x_seed, q_task):
    return T.add(x_seed, q_task)


class TaskDecoder(Module):
    """q = x_seed + W_task e(description);  z = CrossAttn(q, Z_out);
    logits = E_label z  (or w.z + b for regression)."""

    def __init__(self, dim, rng, heads=4, ff_mult=2, dropout=0.0, trainable_labels=False):
        self.dim = dim
        self.task_proj = Linear(dim, dim, rng)
        self.norm_q = LayerNorm(dim)
        self.norm_kv = LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, rng, heads=heads, dropout=dropout)
        self.norm_ff = LayerNorm(dim)
        self.ff = FeedForward(dim, rng, mult=ff_mult, dropout=dropout)
        self.reg_head = Linear(dim, 1, rng)
        self.trainable_labels = trainable_labels
        self.label_tables = {}

    def register_task(self, task):
        if self.trainable_labels and task.kind != "regression" and task.task_id not in self.label_tables:
            self.label_tables[task.task_id] = _LabelTable(task.label_embeddings)

    def task_query(self, task):
        return self.task_proj(Tensor(task.description_embedding))

    def label_matrix(self, task):
        table = self.label_tables.get(task.task_id)
        return table.weight if table is not None else Tensor(task.label_embeddings)

    def attend(self, query, latents):
        """Cross-attention from ``query`` (B, d) into latents (B, K, d) -> (B, d)."""
        q = query.reshape(query.shape[0], 1, self.dim)
        kv = self.norm_kv(latents.Z)
        z = q + self.attn(self.norm_q(q), kv, latents.mask)
        z = z + self.ff(self.norm_ff(z))
        return z.reshape(query.shape[0], self.dim)

    def forward(self, x_seed, latents, task):
        if task.kind != "regression" and task.num_labels == 0:
            raise LabelSetEmpty(task.task_id)
        q = build_query(x_seed, self.task_query(task))
        z = self.attend(q, latents)
        if task.kind == "regression":
            return Prediction(z, value=self.reg_head(z).reshape(z.shape[0]))
        logits = T.matmul(z, self.label_matrix(task).transpose())
        return Prediction(z, logits=logits)


class _LabelTable(Module):
    def __init__(self, init):
        self.weight = parameter(np.array(init, dtype=np.float64))


def cross_entropy(logits, target):
    """Mean of -log softmax(logits)[target] over rows; accepts (m,) or (B, m)."""
    logits = logits if isinstance(logits, Tensor) else Tensor(logits)
    single = logits.ndim == 1
    lg = logits.reshape(1, -1) if single else logits
    target = np.atleast_1d(np.asarray(target, dtype=np.int64))
    m = lg.shape[1]
    if np.any(target < 0) or np.any(target >= m):
        raise IndexOutOfRange(f"target outside [0, {m})")
    lp = T.log_softmax(lg, axis=-1)
    picked = lp[np.arange(lg.shape[0]), target]
    return T.mul(T.mean(picked), -1.0)


def task_loss(pred, target, task):
    target = np.asarray(target)
    if task.kind == "regression":
        if pred.value is None or not np.issubdtype(target.dtype, np.number):
            raise TargetMismatch("regression needs a numeric target and a value prediction")
        return T.mean(T.abs_(T.sub(pred.value, target.astype(np.float64))))
    if pred.logits is None or not np.issubdtype(target.dtype, np.integer):
        raise TargetMismatch(f"{task.kind} needs integer label targets")
    return cross_entropy(pred.logits, target)


def default_embedder(dim):
    return TextEmbedder(dim, seed=0)
