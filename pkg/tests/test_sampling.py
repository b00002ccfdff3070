import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relperceiver import kernels
from relperceiver.sampling import (SamplerConfig, SeedAfterQueryTime, SeedQuery, UnknownNode,
                                   sample_context, sample_structural, sample_temporal)
from relperceiver.store import HeteroGraph, assign_edge_timestamps

from oracles import brute_force_bfs, brute_force_temporal, random_temporal_graph


def _seed(graph, rng):
    n = int(rng.integers(graph.num_nodes))
    t0 = graph.node_time[n]
    base = 0.0 if math.isnan(t0) else t0
    return SeedQuery(n, float(base + rng.integers(0, 8)))


def line_graph():
    # a0 - a1 - a2 - a3 over one relation; times 0, 10, 20, 30
    g = HeteroGraph.from_arrays({"a": 4}, [0.0, 10.0, 20.0, 30.0], [("a", "next", "a")],
                                {("a", "next", "a"): [(0, 1), (1, 2), (2, 3)]})
    return assign_edge_timestamps(g)


def test_topk_nearest_first():
    g = line_graph()
    nodes, edges = sample_temporal(g, SeedQuery(2, 25.0), SamplerConfig(edges_per_type=2))
    assert edges.tolist() == [1, 0]
    assert nodes.tolist() == [1, 2, 0]


def test_window_beats_k():
    g = line_graph()
    cfg = SamplerConfig(edges_per_type=1, time_window=15.0)
    _, edges = sample_temporal(g, SeedQuery(2, 25.0), cfg)
    assert edges.tolist() == [1, 0]


def test_future_edges_never_selected():
    g = line_graph()
    _, edges = sample_temporal(g, SeedQuery(1, 10.0), SamplerConfig(edges_per_type=10))
    assert edges.tolist() == [0]


def test_mean_timestamp_guard():
    # edge time is the mean (15) but its endpoint lives at 20
    g = HeteroGraph.from_arrays({"a": 2, "b": 1}, [10.0, 20.0, 0.0], [("a", "fk", "b")],
                                {("a", "fk", "b"): [(1, 0)]})
    g = assign_edge_timestamps(g, "mean")
    assert g.edge_time[0] == 10.0
    nodes, edges = sample_temporal(g, SeedQuery(0, 12.0), SamplerConfig())
    assert edges.size == 0 and nodes.size == 0


def test_ties_by_edge_id():
    g = HeteroGraph.from_arrays({"a": 4}, [5.0] * 4, [("a", "r", "a")],
                                {("a", "r", "a"): [(3, 2), (0, 1), (1, 2), (2, 3)]})
    g = assign_edge_timestamps(g)
    _, edges = sample_temporal(g, SeedQuery(0, 5.0), SamplerConfig(edges_per_type=3))
    assert edges.tolist() == [0, 1, 2]


def test_structural_bfs_rings():
    g = line_graph()
    nodes, hops = sample_structural(g, SeedQuery(3, 30.0), SamplerConfig(hops=2))
    assert nodes.tolist() == [3, 2, 1] and hops.tolist() == [0, 1, 2]
    nodes, _ = sample_structural(g, SeedQuery(0, 15.0), SamplerConfig(hops=3))
    assert nodes.tolist() == [0, 1]


def test_seed_checks():
    g = line_graph()
    with pytest.raises(SeedAfterQueryTime):
        sample_structural(g, SeedQuery(3, 10.0), SamplerConfig())
    with pytest.raises(UnknownNode):
        sample_context(g, SeedQuery(9, 10.0), SamplerConfig())


def test_structural_only_context():
    g = line_graph()
    ctx = sample_context(g, SeedQuery(2, 25.0), SamplerConfig(), temporal=False)
    assert ctx.temporal_nodes == [] and ctx.selected_edges.size == 0
    assert ctx.structural_nodes[0] == (2, 0)


def test_stochastic_needs_rng_and_is_reproducible():
    g = line_graph()
    cfg = SamplerConfig(edges_per_type=2, stochastic=True)
    with pytest.raises(ValueError):
        sample_temporal(g, SeedQuery(3, 30.0), cfg)
    a = sample_temporal(g, SeedQuery(3, 30.0), cfg, np.random.default_rng(5))
    b = sample_temporal(g, SeedQuery(3, 30.0), cfg, np.random.default_rng(5))
    assert np.array_equal(a[1], b[1]) and a[1].size == 2


def test_stochastic_prefers_recent_edges():
    times = np.arange(40.0)
    g = HeteroGraph.from_arrays({"a": 41}, np.append(times, 0.0), [("a", "r", "a")],
                                {("a", "r", "a"): [(i, 40) for i in range(40)]})
    g = assign_edge_timestamps(g)
    cfg = SamplerConfig(edges_per_type=5, stochastic=True, temporal_decay=3600.0 * 0.2)
    rng = np.random.default_rng(0)
    picks = np.concatenate([sample_temporal(g, SeedQuery(40, 40.0), cfg, rng)[1]
                            for _ in range(200)])
    assert picks.mean() > 30


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([None, 0, 1, 3, 10]),
       st.sampled_from([None, 0.0, 2.0, 5.0]))
def test_temporal_matches_brute_force(seed, k, window):
    rng = np.random.default_rng(seed)
    g = random_temporal_graph(rng, preset_frac=0.3)
    q = _seed(g, rng)
    cfg = SamplerConfig(edges_per_type=k, time_window=window)
    nodes, edges = sample_temporal(g, q, cfg)
    want_nodes, want_edges = brute_force_temporal(g, q.seed_time, k, window)
    assert edges.tolist() == want_edges
    assert nodes.tolist() == want_nodes


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 3), st.integers(1, 4))
def test_structural_matches_brute_force(seed, hops, cap):
    rng = np.random.default_rng(seed)
    g = random_temporal_graph(rng)
    q = _seed(g, rng)
    nodes, hop = sample_structural(g, q, SamplerConfig(hops=hops, neighbors_per_hop=cap))
    assert list(zip(nodes.tolist(), hop.tolist())) == brute_force_bfs(g, q.seed_node, q.seed_time,
                                                                     hops, cap)


@pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")
def test_backends_agree():
    rng = np.random.default_rng(7)
    cfgs = [SamplerConfig(), SamplerConfig(edges_per_type=2, time_window=3.0),
            SamplerConfig(hops=3, neighbors_per_hop=2, edges_per_type=None)]
    for _ in range(100):
        g = random_temporal_graph(rng, preset_frac=0.2)
        q = _seed(g, rng)
        for cfg in cfgs:
            with kernels.use("python"):
                a = sample_context(g, q, cfg)
            with kernels.use("compiled"):
                b = sample_context(g, q, cfg)
            assert a == b


def test_use_restores_backend():
    before = kernels.BACKEND_NAME
    with kernels.use("python"):
        assert kernels.BACKEND_NAME == "python"
    assert kernels.BACKEND_NAME == before
    with pytest.raises(ValueError):
        kernels.use("fortran")


def test_env_forces_python_backend():
    import os
    import subprocess
    import sys
    env = {**os.environ, "RELPERCEIVER_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "from relperceiver import kernels; print(kernels.BACKEND_NAME)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"
