"""Structural (time-restricted BFS) and time-context edge sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

HOUR = 3600.0


class UnknownNode(KeyError):
    pass


class SeedAfterQueryTime(ValueError):
    """The seed entity itself is timestamped after the seed time."""


@dataclass(frozen=True)
class SeedQuery:
    seed_node: int
    seed_time: float


@dataclass(frozen=True)
class SamplerConfig:
    hops: int = 2
    neighbors_per_hop: int = 10
    edges_per_type: int | None = 10
    time_window: float | None = None
    temporal_decay: float = 0.1
    stochastic: bool = False

    def __post_init__(self):
        if self.hops < 0:
            raise ValueError("hops must be >= 0")
        if self.temporal_decay < 0:
            raise ValueError("temporal_decay must be non-negative")
        if self.time_window is not None and self.time_window < 0:
            raise ValueError("time_window must be non-negative")


@dataclass(frozen=True, eq=False)
class SampledContext:
    structural: np.ndarray  # node ids, seed first
    hops: np.ndarray  # hop distance aligned with ``structural``
    temporal: np.ndarray  # node ids, endpoints of ``selected_edges``
    selected_edges: np.ndarray  # global edge indices

    @property
    def structural_nodes(self):
        return list(zip(self.structural.tolist(), self.hops.tolist()))

    @property
    def temporal_nodes(self):
        return self.temporal.tolist()

    def __eq__(self, other):
        return (isinstance(other, SampledContext)
                and np.array_equal(self.structural, other.structural)
                and np.array_equal(self.hops, other.hops)
                and np.array_equal(self.temporal, other.temporal)
                and np.array_equal(self.selected_edges, other.selected_edges))


class StructuralIndex:
    """Undirected CSR adjacency, each list sorted most-recent-first.

    Untimestamped neighbors sort after timestamped ones; ties by node id.
    """

    def __init__(self, graph):
        n = graph.num_nodes
        u = np.concatenate([graph.edge_src, graph.edge_dst])
        v = np.concatenate([graph.edge_dst, graph.edge_src])
        t = graph.node_time[v]
        nan = np.isnan(t)
        order = np.lexsort((v, -np.where(nan, 0.0, t), nan, u))
        self.nbrs = np.ascontiguousarray(v[order], dtype=np.int64)
        self.nbr_time = np.ascontiguousarray(t[order], dtype=np.float64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(u, minlength=n), out=self.indptr[1:])
        self.num_nodes = n


class TemporalIndex:
    """Per-relation edge timelines sorted by (timestamp, edge id).

    ``guard`` is the latest endpoint timestamp of each edge; an edge is only
    eligible at seed time ``t`` if both its own time and its guard are <= t.
    """

    def __init__(self, graph):
        times, glob, guard, seg = [], [], [], [0]
        node_t = graph.node_time
        for r in range(len(graph.relations)):
            lo, hi = int(graph.edge_offsets[r]), int(graph.edge_offsets[r + 1])
            et = graph.edge_time[lo:hi]
            keep = np.flatnonzero(~np.isnan(et))
            order = keep[np.lexsort((keep, et[keep]))]
            times.append(et[order])
            gidx = lo + order
            glob.append(gidx)
            g = np.fmax(node_t[graph.edge_src[gidx]], node_t[graph.edge_dst[gidx]])
            guard.append(np.where(np.isnan(g), -np.inf, g))
            seg.append(seg[-1] + len(order))
        cat = lambda xs, dt: np.ascontiguousarray(np.concatenate(xs) if xs else np.zeros(0), dtype=dt)
        self.times = cat(times, np.float64)
        self.edges = cat(glob, np.int64)
        self.guard = cat(guard, np.float64)
        self.segments = np.asarray(seg, dtype=np.int64)


def structural_index(graph):
    return graph.cached("structural_index", StructuralIndex)


def temporal_index(graph):
    return graph.cached("temporal_index", TemporalIndex)


def _check_query(graph, query):
    n = int(query.seed_node)
    if not 0 <= n < graph.num_nodes:
        raise UnknownNode(n)
    t = graph.node_time[n]
    if not np.isnan(t) and t > query.seed_time:
        raise SeedAfterQueryTime(f"node {n} has time {t} > seed time {query.seed_time}")
    return n


def sample_structural(graph, query, config):
    """Seed plus up to ``hops`` BFS rings of admissible neighbors.

    Returns ``(node_ids, hop_distances)``.
    """
    seed = _check_query(graph, query)
    idx = structural_index(graph)
    return kernels.bfs_past(idx.indptr, idx.nbrs, idx.nbr_time, idx.num_nodes, seed,
                            float(query.seed_time), int(config.hops),
                            int(config.neighbors_per_hop))


def sample_temporal(graph, query, config, rng=None):
    """Edges closest in time to the seed time, never after it.

    Returns ``(endpoint_node_ids, selected_global_edge_ids)``.  A time window,
    when set, takes precedence over the per-relation top-k.
    """
    _check_query(graph, query)
    idx = temporal_index(graph)
    t_seed = float(query.seed_time)
    window = -1.0 if config.time_window is None else float(config.time_window)
    if config.time_window is not None or config.edges_per_type is None:
        k = -1
    else:
        k = int(config.edges_per_type)
    stochastic = config.stochastic and k >= 0
    if stochastic and rng is None:
        raise ValueError("stochastic sampling needs an explicit rng")
    picked = []
    for r in range(len(idx.segments) - 1):
        lo, hi = int(idx.segments[r]), int(idx.segments[r + 1])
        if lo == hi:
            continue
        pos = kernels.select_past(idx.times, idx.guard, lo, hi, t_seed, window,
                                  -1 if stochastic else k)
        if stochastic and pos.size > k:
            score = (t_seed - idx.times[pos]) / HOUR
            keys = -config.temporal_decay * score + rng.gumbel(size=pos.size)
            chosen = np.sort(np.argsort(-keys, kind="stable")[:k])
            pos = pos[chosen]
        picked.append(idx.edges[pos])
    edges = np.concatenate(picked) if picked else np.zeros(0, dtype=np.int64)
    ends = np.empty(2 * edges.size, dtype=np.int64)
    ends[0::2] = graph.edge_src[edges]
    ends[1::2] = graph.edge_dst[edges]
    _, first = np.unique(ends, return_index=True)
    nodes = ends[np.sort(first)]
    return nodes, edges


def sample_context(graph, query, config, rng=None, temporal=True):
    """Both branches for one seed; ``temporal=False`` leaves the temporal branch empty."""
    nodes, hops = sample_structural(graph, query, config)
    if temporal:
        tnodes, tedges = sample_temporal(graph, query, config, rng)
    else:
        tnodes = tedges = np.zeros(0, dtype=np.int64)
    return SampledContext(nodes, hops, tnodes, tedges)
