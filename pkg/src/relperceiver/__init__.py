"""Perceiver-style encoder for relational entity graphs built from multi-table databases."""
from .kernels import BACKEND_NAME
from .store import HeteroGraph, RelationalSchema, load_graph, load_schema
from .sampling import SampledContext, SamplerConfig, SeedQuery, sample_context
from .config import RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME", "HeteroGraph", "RelationalSchema", "load_graph", "load_schema",
    "SampledContext", "SamplerConfig", "SeedQuery", "sample_context", "RunConfig",
    "load_config", "__version__",
]
