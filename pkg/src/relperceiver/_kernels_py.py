"""Pure-Python sampler kernels (fallback for the compiled ``_kernels``).

Both implementations share signatures and must return identical arrays.
"""
import math
from bisect import bisect_right

import numpy as np


def select_past(times, guard, lo, hi, t_seed, window, k):
    """Positions in ``[lo, hi)`` of a time-sorted timeline, nearest-first.

    Only entries with ``times <= t_seed`` and ``guard <= t_seed`` qualify.
    ``window >= 0`` keeps entries with ``t_seed - t <= window``; ``k >= 0``
    caps the count.  Within equal times, lower positions (lower edge ids)
    come first.
    """
    out = []
    if k == 0:
        return np.zeros(0, dtype=np.int64)
    end = bisect_right(times, t_seed, lo, hi)
    i = end - 1
    while i >= lo:
        t = times[i]
        if window >= 0 and t_seed - t > window:
            break
        gs = i
        while gs - 1 >= lo and times[gs - 1] == t:
            gs -= 1
        for j in range(gs, i + 1):
            if guard[j] <= t_seed:
                out.append(j)
                if 0 <= k == len(out):
                    return np.asarray(out, dtype=np.int64)
        i = gs - 1
    return np.asarray(out, dtype=np.int64)


def bfs_past(indptr, nbrs, nbr_time, num_nodes, seed, t_seed, hops, cap):
    """Time-restricted BFS; neighbor lists must be pre-sorted most-recent-first.

    Returns ``(nodes, hop)`` with the seed at hop 0.  Neighbors timestamped
    after ``t_seed`` are skipped; NaN (untimestamped) neighbors are admissible.
    """
    visited = set([seed])
    nodes = [seed]
    hop_of = [0]
    frontier = [seed]
    for h in range(1, hops + 1):
        nxt = []
        for u in frontier:
            taken = 0
            for p in range(indptr[u], indptr[u + 1]):
                if cap >= 0 and taken >= cap:
                    break
                v = nbrs[p]
                if v in visited:
                    continue
                t = nbr_time[p]
                if t > t_seed:
                    continue
                visited.add(v)
                nxt.append(v)
                nodes.append(v)
                hop_of.append(h)
                taken += 1
        if not nxt:
            break
        frontier = nxt
    return np.asarray(nodes, dtype=np.int64), np.asarray(hop_of, dtype=np.int64)
