"""Shortest-path kernels over CSR adjacency: BFS aggregates, Brandes
betweenness, and equal-split load flow.

Each kernel exists twice: a numba ``@njit`` version (``*_njit``) and a
pure-numpy version (``*_numpy``) that vectorises per BFS level. The
public functions dispatch on the active backend. Parallel kernels
accumulate into a fixed number of chunk-local buffers that are reduced
in a fixed order, so results do not depend on the worker count.
"""

import numpy as np

from .backend import HAVE_NUMBA, USE_NUMBA

N_CHUNKS = 64  # fixed partial-sum layout, independent of thread count

if HAVE_NUMBA:
    from numba import njit, prange

    @njit(cache=True)
    def _bfs_distances_njit(indptr, indices, source, n):
        dist = np.full(n, -1, np.int32)
        queue = np.empty(n, np.int32)
        dist[source] = 0
        queue[0] = source
        head, tail = 0, 1
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if dist[v] < 0:
                    dist[v] = du + 1
                    queue[tail] = v
                    tail += 1
        return dist

    @njit(cache=True, parallel=True)
    def _sssp_aggregates_njit(indptr, indices, n):
        reach = np.zeros(n, np.int64)
        dist_sum = np.zeros(n, np.int64)
        inv_sum = np.zeros(n, np.float64)
        ecc = np.zeros(n, np.int32)
        for s in prange(n):
            dist = np.full(n, -1, np.int32)
            queue = np.empty(n, np.int32)
            dist[s] = 0
            queue[0] = s
            head, tail = 0, 1
            r = 0
            dsum = 0
            e = 0
            while head < tail:
                u = queue[head]
                head += 1
                du = dist[u]
                if du > 0:
                    r += 1
                    dsum += du
                    if du > e:
                        e = du
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if dist[v] < 0:
                        dist[v] = du + 1
                        queue[tail] = v
                        tail += 1
            # harmonic sum accumulated per level for backend-identical order
            isum = 0.0
            if e > 0:
                counts = np.zeros(e + 1, np.int64)
                for i in range(tail):
                    counts[dist[queue[i]]] += 1
                for d in range(1, e + 1):
                    isum += counts[d] * (1.0 / d)
            reach[s] = r
            dist_sum[s] = dsum
            inv_sum[s] = isum
            ecc[s] = e
        return reach, dist_sum, inv_sum, ecc

    @njit(cache=True, parallel=True)
    def _brandes_njit(out_indptr, out_indices, in_indptr, in_indices, n):
        partial = np.zeros((N_CHUNKS, n), np.float64)
        chunk = (n + N_CHUNKS - 1) // N_CHUNKS
        for c in prange(N_CHUNKS):
            lo = c * chunk
            hi = min(n, lo + chunk)
            dist = np.full(n, -1, np.int32)
            sigma = np.zeros(n, np.float64)
            delta = np.zeros(n, np.float64)
            order = np.empty(n, np.int32)
            for s in range(lo, hi):
                dist[s] = 0
                sigma[s] = 1.0
                order[0] = s
                head, tail = 0, 1
                while head < tail:
                    u = order[head]
                    head += 1
                    du = dist[u]
                    for k in range(out_indptr[u], out_indptr[u + 1]):
                        v = out_indices[k]
                        if dist[v] < 0:
                            dist[v] = du + 1
                            order[tail] = v
                            tail += 1
                        if dist[v] == du + 1:
                            sigma[v] += sigma[u]
                for i in range(tail - 1, 0, -1):
                    w = order[i]
                    coeff = (1.0 + delta[w]) / sigma[w]
                    for k in range(in_indptr[w], in_indptr[w + 1]):
                        v = in_indices[k]
                        if dist[v] == dist[w] - 1:
                            delta[v] += sigma[v] * coeff
                    partial[c, w] += delta[w]
                for i in range(tail):
                    u = order[i]
                    dist[u] = -1
                    sigma[u] = 0.0
                    delta[u] = 0.0
        return partial

    @njit(cache=True, parallel=True)
    def _load_njit(out_indptr, out_indices, in_indptr, in_indices, n):
        partial = np.zeros((N_CHUNKS, n), np.float64)
        chunk = (n + N_CHUNKS - 1) // N_CHUNKS
        for c in prange(N_CHUNKS):
            lo = c * chunk
            hi = min(n, lo + chunk)
            dist = np.full(n, -1, np.int32)
            npred = np.zeros(n, np.int64)
            delta = np.zeros(n, np.float64)
            order = np.empty(n, np.int32)
            for s in range(lo, hi):
                dist[s] = 0
                order[0] = s
                head, tail = 0, 1
                while head < tail:
                    u = order[head]
                    head += 1
                    du = dist[u]
                    for k in range(out_indptr[u], out_indptr[u + 1]):
                        v = out_indices[k]
                        if dist[v] < 0:
                            dist[v] = du + 1
                            order[tail] = v
                            tail += 1
                        if dist[v] == du + 1:
                            npred[v] += 1
                for i in range(tail - 1, 0, -1):
                    w = order[i]
                    share = (1.0 + delta[w]) / npred[w]
                    for k in range(in_indptr[w], in_indptr[w + 1]):
                        v = in_indices[k]
                        if dist[v] == dist[w] - 1:
                            delta[v] += share
                    partial[c, w] += delta[w]
                for i in range(tail):
                    u = order[i]
                    dist[u] = -1
                    npred[u] = 0
                    delta[u] = 0.0
        return partial


def gather_neighbors(indptr, indices, frontier):
    """Flatten the adjacency of ``frontier`` nodes.

    Returns (sources, targets): parallel arrays where targets[i] is a
    neighbor of sources[i], in CSR order.
    """
    starts = indptr[frontier]
    counts = indptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        empty = np.empty(0, indices.dtype)
        return empty, empty
    pos = np.cumsum(counts) - counts
    flat = np.repeat(starts - pos, counts) + np.arange(total, dtype=np.int64)
    return np.repeat(frontier, counts), indices[flat]


def _bfs_distances_numpy(indptr, indices, source, n):
    dist = np.full(n, -1, np.int32)
    dist[source] = 0
    frontier = np.array([source], dtype=indices.dtype)
    d = 0
    while frontier.size:
        _, targets = gather_neighbors(indptr, indices, frontier)
        new = np.unique(targets[dist[targets] < 0])
        d += 1
        dist[new] = d
        frontier = new
    return dist


def _sssp_aggregates_numpy(indptr, indices, n):
    reach = np.zeros(n, np.int64)
    dist_sum = np.zeros(n, np.int64)
    inv_sum = np.zeros(n, np.float64)
    ecc = np.zeros(n, np.int32)
    for s in range(n):
        dist = _bfs_distances_numpy(indptr, indices, s, n)
        reached = dist > 0
        r = int(reached.sum())
        reach[s] = r
        if r:
            dvals = dist[reached].astype(np.int64)
            dist_sum[s] = int(dvals.sum())
            e = int(dvals.max())
            ecc[s] = e
            counts = np.bincount(dvals, minlength=e + 1)
            isum = 0.0
            for d in range(1, e + 1):
                isum += counts[d] * (1.0 / d)
            inv_sum[s] = isum
    return reach, dist_sum, inv_sum, ecc


def _bfs_levels_numpy(out_indptr, out_indices, source, n):
    """BFS levels plus shortest-path counts, vectorised per level."""
    dist = np.full(n, -1, np.int32)
    sigma = np.zeros(n, np.float64)
    dist[source] = 0
    sigma[source] = 1.0
    levels = [np.array([source], dtype=out_indices.dtype)]
    frontier = levels[0]
    d = 0
    while True:
        srcs, targets = gather_neighbors(out_indptr, out_indices, frontier)
        if targets.size == 0:
            break
        undiscovered = dist[targets] < 0
        new = np.unique(targets[undiscovered])
        if new.size == 0:
            break
        d += 1
        dist[new] = d
        onlevel = dist[targets] == d
        np.add.at(sigma, targets[onlevel], sigma[srcs[onlevel]])
        levels.append(new)
        frontier = new
    return dist, sigma, levels


def _brandes_numpy(out_indptr, out_indices, in_indptr, in_indices, n):
    acc = np.zeros(n, np.float64)
    for s in range(n):
        dist, sigma, levels = _bfs_levels_numpy(out_indptr, out_indices, s, n)
        delta = np.zeros(n, np.float64)
        for level in reversed(levels[1:]):
            ws, preds = gather_neighbors(in_indptr, in_indices, level)
            on_path = dist[preds] == dist[ws] - 1
            ws, preds = ws[on_path], preds[on_path]
            coeff = (1.0 + delta[ws]) / sigma[ws]
            np.add.at(delta, preds, sigma[preds] * coeff)
            acc[level] += delta[level]
    return acc


def _load_numpy(out_indptr, out_indices, in_indptr, in_indices, n):
    acc = np.zeros(n, np.float64)
    for s in range(n):
        dist, _, levels = _bfs_levels_numpy(out_indptr, out_indices, s, n)
        npred = np.zeros(n, np.int64)
        for level in levels[1:]:
            ws, preds = gather_neighbors(in_indptr, in_indices, level)
            on_path = dist[preds] == dist[ws] - 1
            np.add.at(npred, ws[on_path], 1)
        delta = np.zeros(n, np.float64)
        for level in reversed(levels[1:]):
            ws, preds = gather_neighbors(in_indptr, in_indices, level)
            on_path = dist[preds] == dist[ws] - 1
            ws, preds = ws[on_path], preds[on_path]
            share = (1.0 + delta[ws]) / npred[ws]
            np.add.at(delta, preds, share)
            acc[level] += delta[level]
    return acc


def bfs_distances(indptr, indices, source, n):
    """Hop distances from ``source``; -1 marks unreachable nodes."""
    if USE_NUMBA:
        return _bfs_distances_njit(indptr, indices, source, n)
    return _bfs_distances_numpy(indptr, indices, source, n)


def sssp_aggregates(indptr, indices, n):
    """Per-source BFS summary: (others reached, distance sum,
    reciprocal-distance sum, eccentricity over reached nodes)."""
    if USE_NUMBA:
        return _sssp_aggregates_njit(indptr, indices, n)
    return _sssp_aggregates_numpy(indptr, indices, n)


def betweenness_raw(out_indptr, out_indices, in_indptr, in_indices, n):
    """Unnormalised directed betweenness (Brandes accumulation)."""
    if USE_NUMBA:
        partial = _brandes_njit(out_indptr, out_indices, in_indptr, in_indices, n)
        return partial.sum(axis=0)
    return _brandes_numpy(out_indptr, out_indices, in_indptr, in_indices, n)


def load_raw(out_indptr, out_indices, in_indptr, in_indices, n):
    """Unnormalised load: unit flow per ordered pair, split equally among
    shortest-path predecessors at every hop."""
    if USE_NUMBA:
        partial = _load_njit(out_indptr, out_indices, in_indptr, in_indices, n)
        return partial.sum(axis=0)
    return _load_numpy(out_indptr, out_indices, in_indptr, in_indices, n)
