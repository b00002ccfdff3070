"""Run configuration: flat ``key = value`` files with command-line overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .features import FeatureConfig
from .model import ModelConfig
from .sampling import SamplerConfig

LATENT_GRID = (8, 16, 32)
LAYER_GRID = (2, 4, 6)


@dataclass
class RunConfig:
    data: str = ""
    out: str = "runs"
    run_id: str = ""
    seed: int = 0
    deterministic: bool = True
    mode: str = "single_task"
    tasks: str = ""
    epochs: int = 30
    batch_size: int = 512
    eval_batch_size: int = 1024
    lr: float = 1e-3
    weight_decay: float = 1e-5
    warmup_steps: int = 10
    hidden_dim: int = 128
    num_latents: int = 16
    layers: int = 2
    heads: int = 4
    ff_mult: int = 2
    dropout: float = 0.2
    trainable_labels: bool = False
    hops: int = 2
    neighbors_per_hop: int = 10
    edges_per_type: int = 10
    time_window: float | None = None
    temporal_decay: float = 0.1
    stochastic: bool = False
    combine: str = "max"
    no_temporal_sampler: bool = False
    full_self_attention: bool = False
    allow_off_grid: bool = False

    def __post_init__(self):
        if self.mode not in ("single_task", "multi_task"):
            raise ValueError(f"mode must be single_task or multi_task, got {self.mode!r}")
        if not self.allow_off_grid:
            if self.num_latents not in LATENT_GRID:
                raise ValueError(f"num_latents {self.num_latents} not in {LATENT_GRID}")
            if self.layers not in LAYER_GRID:
                raise ValueError(f"layers {self.layers} not in {LAYER_GRID}")

    @property
    def task_list(self):
        return [t.strip() for t in self.tasks.split(",") if t.strip()]

    def sampler_config(self):
        return SamplerConfig(hops=self.hops, neighbors_per_hop=self.neighbors_per_hop,
                             edges_per_type=self.edges_per_type, time_window=self.time_window,
                             temporal_decay=self.temporal_decay, stochastic=self.stochastic)

    def feature_config(self):
        return FeatureConfig(hidden_dim=self.hidden_dim, hops=self.hops)

    def model_config(self):
        return ModelConfig(hidden_dim=self.hidden_dim, num_latents=self.num_latents,
                           layers=self.layers, heads=self.heads, ff_mult=self.ff_mult,
                           dropout=self.dropout, trainable_labels=self.trainable_labels,
                           full_self_attention=self.full_self_attention)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'' if v is None else _format(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, **overrides):
        values = parse_key_values(text)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**coerce(values))


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def parse_key_values(text):
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key = value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _coerce_one(name, typ, value):
    if not isinstance(value, str):
        return value
    typ = str(typ)
    if value == "" and "None" in typ:
        return None
    if "bool" in typ:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{name}: not a boolean: {value!r}")
    if "int" in typ:
        return int(value)
    if "float" in typ:
        return float(value)
    return value


def coerce(values):
    known = {f.name: f.type for f in fields(RunConfig)}
    unknown = set(values) - set(known)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return {k: _coerce_one(k, known[k], v) for k, v in values.items()}


def load_config(path, **overrides):
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_text(fh.read(), **overrides)
