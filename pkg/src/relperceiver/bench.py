"""Timing of the sampler kernels (compiled vs pure Python) and of the encoder."""
from __future__ import annotations

import csv
import io
import time

import numpy as np

from . import kernels
from .encoder import benchmark_complexity
from .sampling import SamplerConfig, SeedQuery, sample_context
from .store import HeteroGraph, assign_edge_timestamps


def random_graph(rng, num_nodes=5000, num_edges=40000, num_relations=3, horizon=1e7):
    """Single node type, ``num_relations`` edge types, uniform times."""
    node_time = rng.uniform(0.0, horizon, size=num_nodes)
    relations = [("nodes", f"fk{r}", "nodes") for r in range(num_relations)]
    m = num_edges // num_relations
    edges = {rel: list(zip(rng.integers(num_nodes, size=m).tolist(),
                           rng.integers(num_nodes, size=m).tolist())) for rel in relations}
    graph = HeteroGraph.from_arrays({"nodes": num_nodes}, node_time, relations, edges)
    return assign_edge_timestamps(graph, "max")


def benchmark_kernels(num_queries=2000, repeats=3, seed=0, config=None, **graph_kw):
    """Seconds per ``num_queries`` context samples for each available backend.

    Index construction is excluded; each backend sees identical queries.
    """
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, **graph_kw)
    config = config or SamplerConfig()
    nodes = rng.integers(graph.num_nodes, size=num_queries)
    times = graph.node_time[nodes] + rng.uniform(0.0, 1e6, size=num_queries)
    queries = [SeedQuery(int(n), float(t)) for n, t in zip(nodes, times)]
    sample_context(graph, queries[0], config)
    rows = []
    reference = None
    for name in kernels.available():
        with kernels.use(name):
            out = [sample_context(graph, q, config) for q in queries]
            best = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                for q in queries:
                    sample_context(graph, q, config)
                best.append(time.perf_counter() - t0)
        if reference is None:
            reference = out
        rows.append({"backend": name, "queries": num_queries, "min_s": min(best),
                     "mean_s": float(np.mean(best)), "matches_python": out == reference})
    base = rows[0]["min_s"]
    for r in rows:
        r["speedup"] = base / r["min_s"]
    return rows


def rows_to_csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([f"{r[c]:.6g}" if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def complexity_csv(**kw):
    rows, exponents = benchmark_complexity(**kw)
    return rows_to_csv(rows, ("N_g", "K", "L", "mode", "mean_ms", "std_ms")), exponents
