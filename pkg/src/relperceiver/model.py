"""Featurizer + perceiver encoder + task decoder as one trainable model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import TaskDecoder
from .encoder import PerceiverEncoder
from .features import FeatureConfig, Featurizer, FeatureStore
from .nn import Module


@dataclass(frozen=True)
class ModelConfig:
    hidden_dim: int = 128
    num_latents: int = 16
    layers: int = 2
    heads: int = 4
    ff_mult: int = 2
    dropout: float = 0.2
    trainable_labels: bool = False
    full_self_attention: bool = False


class RelationalPerceiver(Module):
    def __init__(self, store, config, rng):
        self.config = config
        self.featurizer = Featurizer(store, rng)
        d = store.config.hidden_dim
        self.encoder = PerceiverEncoder(d, rng, config.num_latents, config.layers, config.heads,
                                        config.ff_mult, config.dropout, config.full_self_attention)
        self.decoder = TaskDecoder(d, rng, config.heads, config.ff_mult, config.dropout,
                                   config.trainable_labels)

    def register_tasks(self, tasks):
        for t in tasks:
            self.decoder.register_task(t)

    def forward(self, contexts, seed_times, task):
        s, t = self.featurizer.tokenize_batch(contexts, seed_times)
        latents = self.encoder(s.tokens, t.tokens, s.mask, t.mask)
        x_seed = s.tokens[:, 0, :]
        return self.decoder(x_seed, latents, task)


def build_model(graph, feature_config, model_config, seed):
    """Fresh model with all parameters drawn from ``default_rng(seed)``."""
    if feature_config.hidden_dim != model_config.hidden_dim:
        raise ValueError("feature and model hidden_dim differ")
    rng = np.random.default_rng(seed)
    store = FeatureStore(graph, feature_config)
    store.freeze()
    return RelationalPerceiver(store, model_config, rng)
