"""Compiled vs pure-Python sampler kernels on one random graph.

    python benchmarks/bench_kernels.py --queries 5000 --nodes 20000 --edges 200000
"""
import argparse

from relperceiver import kernels
from relperceiver.bench import benchmark_kernels, rows_to_csv
from relperceiver.sampling import SamplerConfig


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--queries", type=int, default=2000)
    p.add_argument("--nodes", type=int, default=5000)
    p.add_argument("--edges", type=int, default=40000)
    p.add_argument("--relations", type=int, default=3)
    p.add_argument("--hops", type=int, default=2)
    p.add_argument("--neighbors", type=int, default=10)
    p.add_argument("--edges-per-type", type=int, default=10)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    if kernels.compiled_backend is None:
        print("# compiled extension not built; timing the Python fallback only")
    cfg = SamplerConfig(hops=args.hops, neighbors_per_hop=args.neighbors,
                        edges_per_type=args.edges_per_type)
    rows = benchmark_kernels(args.queries, args.repeats, args.seed, cfg, num_nodes=args.nodes,
                             num_edges=args.edges, num_relations=args.relations)
    print(rows_to_csv(rows, ("backend", "queries", "min_s", "mean_s", "speedup", "matches_python")),
          end="")


if __name__ == "__main__":
    main()
