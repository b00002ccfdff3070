# cython: language_level=3
"""Compiled sampler kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef Py_ssize_t _bisect_right(const double[:] a, double x, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) // 2
        if x < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def select_past(const double[:] times, const double[:] guard, Py_ssize_t lo, Py_ssize_t hi,
                double t_seed, double window, Py_ssize_t k):
    cdef Py_ssize_t end, i, gs, j, n = 0
    cdef double t
    cdef Py_ssize_t cap = (hi - lo) if k < 0 else min(k, hi - lo)
    out = np.empty(max(cap, 0), dtype=np.int64)
    cdef cnp.int64_t[:] o = out
    if cap <= 0:
        return out[:0]
    end = _bisect_right(times, t_seed, lo, hi)
    i = end - 1
    with nogil:
        while i >= lo:
            t = times[i]
            if window >= 0 and t_seed - t > window:
                break
            gs = i
            while gs - 1 >= lo and times[gs - 1] == t:
                gs -= 1
            j = gs
            while j <= i:
                if guard[j] <= t_seed:
                    o[n] = j
                    n += 1
                    if n == cap:
                        break
                j += 1
            if n == cap:
                break
            i = gs - 1
    return out[:n]


def bfs_past(const cnp.int64_t[:] indptr, const cnp.int64_t[:] nbrs, const double[:] nbr_time,
             Py_ssize_t num_nodes, Py_ssize_t seed, double t_seed, Py_ssize_t hops, Py_ssize_t cap):
    cdef cnp.uint8_t[:] visited = np.zeros(num_nodes, dtype=np.uint8)
    nodes_arr = np.empty(num_nodes, dtype=np.int64)
    hop_arr = np.empty(num_nodes, dtype=np.int64)
    cdef cnp.int64_t[:] nodes = nodes_arr
    cdef cnp.int64_t[:] hop_of = hop_arr
    cdef Py_ssize_t n = 1, f_lo = 0, f_hi = 1, h, q, u, p, v, taken
    cdef double t
    visited[seed] = 1
    nodes[0] = seed
    hop_of[0] = 0
    with nogil:
        for h in range(1, hops + 1):
            for q in range(f_lo, f_hi):
                u = nodes[q]
                taken = 0
                for p in range(indptr[u], indptr[u + 1]):
                    if cap >= 0 and taken >= cap:
                        break
                    v = nbrs[p]
                    if visited[v]:
                        continue
                    t = nbr_time[p]
                    if t > t_seed:
                        continue
                    visited[v] = 1
                    nodes[n] = v
                    hop_of[n] = h
                    n += 1
                    taken += 1
            if n == f_hi:
                break
            f_lo = f_hi
            f_hi = n
    return nodes_arr[:n], hop_arr[:n]
