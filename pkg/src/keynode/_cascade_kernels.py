"""Cascade simulation kernels.

Bernoulli draws are keyed on (run seed, arc index) with a splitmix64
finalizer, never on a sequential stream. An arc fires at most once per
cascade, so the draw for each attempt is independent of frontier
processing order. Consequences:

* the numba kernel and the vectorised numpy kernel produce bitwise
  identical outcomes for the same seed;
* batch results do not depend on thread count or execution order;
* simultaneous attempts on one target resolve as independent trials
  where any success activates it.

The epidemic (susceptible/infected/recovered) kernel is written
separately from the cascade kernel on purpose: the two serve as
independent implementations of the same gamma=1 process and are checked
against each other statistically. Its draws use a distinct arc salt so
the two streams are uncorrelated at equal seeds.
"""

import numpy as np

from .backend import HAVE_NUMBA, USE_NUMBA
from .rng import MASK64

_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_GOLDEN = 0x9E3779B97F4A7C15
_C3 = 0x632BE59BD9B4E019
_ARC_SALT_IC = 0xD6E8FEB86659FD93
_ARC_SALT_SIR = 0xA24BAED4963EE407

_INV_2_53 = 2.0**-53


# ---------------------------------------------------------------------------
# pure-python reference arithmetic (also used to derive seeds outside kernels)


def _mix64_py(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def arc_draw_py(run_seed: int, arc_index: int, salt: int = _ARC_SALT_IC) -> float:
    u = _mix64_py(run_seed ^ ((arc_index + 1) * salt))
    return (u >> 11) * _INV_2_53


if HAVE_NUMBA:
    from numba import njit, prange

    @njit(cache=True, inline="always")
    def _mix64(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
        return z ^ (z >> np.uint64(31))

    @njit(cache=True, inline="always")
    def _combine(h, v):
        return _mix64((h ^ v) * np.uint64(_GOLDEN) + np.uint64(_C3))

    @njit(cache=True, inline="always")
    def _run_seed(master, node, t_idx, run_idx):
        h = _mix64(np.uint64(master))
        h = _combine(h, np.uint64(node))
        h = _combine(h, np.uint64(t_idx))
        h = _combine(h, np.uint64(run_idx))
        return h

    @njit(cache=True, inline="always")
    def _arc_uniform(run_seed, arc_index, salt):
        u = _mix64(run_seed ^ ((arc_index + np.uint64(1)) * salt))
        return np.float64(u >> np.uint64(11)) * _INV_2_53

    @njit(cache=True)
    def _ic_run_njit(indptr, indices, seed_node, p, run_seed, active, frontier, scratch):
        """One cascade; scratch arrays are reset before returning."""
        salt = np.uint64(_ARC_SALT_IC)
        active[seed_node] = True
        frontier[0] = seed_node
        fsize = 1
        touched = 1
        scratch[0] = seed_node
        total = 1
        peak = 1
        peak_time = 0
        iteration = 0
        while fsize > 0:
            iteration += 1
            nsize = 0
            for i in range(fsize):
                u = frontier[i]
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if not active[v]:
                        if _arc_uniform(run_seed, np.uint64(k), salt) < p:
                            active[v] = True
                            scratch[touched] = v
                            touched += 1
                            frontier[fsize + nsize] = v
                            nsize += 1
            # shift the new frontier to the front for the next round
            for i in range(nsize):
                frontier[i] = frontier[fsize + i]
            if nsize > 0:
                total += nsize
                if nsize > peak:
                    peak = nsize
                    peak_time = iteration
            fsize = nsize
        for i in range(touched):
            active[scratch[i]] = False
        return total, peak, peak_time

    @njit(cache=True)
    def _ic_single_njit(indptr, indices, seed_node, p, run_seed):
        n = indptr.shape[0] - 1
        active = np.zeros(n, np.bool_)
        frontier = np.empty(2 * n, np.int32)
        scratch = np.empty(n, np.int32)
        return _ic_run_njit(
            indptr, indices, seed_node, p, np.uint64(run_seed), active, frontier, scratch
        )

    @njit(cache=True, parallel=True)
    def _ic_batch_njit(indptr, indices, nodes, t_indices, p_values, runs, master):
        npairs = nodes.shape[0]
        n = indptr.shape[0] - 1
        sum_range = np.zeros(npairs, np.int64)
        sum_peak = np.zeros(npairs, np.int64)
        sum_ptime = np.zeros(npairs, np.int64)
        for j in prange(npairs):
            node = nodes[j]
            t_idx = t_indices[j]
            p = p_values[j]
            active = np.zeros(n, np.bool_)
            frontier = np.empty(2 * n, np.int32)
            scratch = np.empty(n, np.int32)
            sr = 0
            sp = 0
            st = 0
            for run in range(runs):
                seed = _run_seed(
                    np.uint64(master), np.uint64(node), np.uint64(t_idx), np.uint64(run)
                )
                r, pk, pt = _ic_run_njit(
                    indptr, indices, node, p, seed, active, frontier, scratch
                )
                sr += r
                sp += pk
                st += pt
            sum_range[j] = sr
            sum_peak[j] = sp
            sum_ptime[j] = st
        return sum_range, sum_peak, sum_ptime

    @njit(cache=True)
    def _sir_single_njit(indptr, indices, seed_node, beta, run_seed):
        """Discrete-time epidemic, recovery after exactly one step.

        States: 0 susceptible, 1 infected, 2 recovered.
        """
        salt = np.uint64(_ARC_SALT_SIR)
        seed = np.uint64(run_seed)
        n = indptr.shape[0] - 1
        state = np.zeros(n, np.int8)
        infected = np.empty(n, np.int32)
        newly = np.empty(n, np.int32)
        state[seed_node] = 1
        infected[0] = seed_node
        isize = 1
        total = 1
        peak = 1
        peak_time = 0
        iteration = 0
        while isize > 0:
            iteration += 1
            nsize = 0
            for i in range(isize):
                u = infected[i]
                for k in range(indptr[u], indptr[u + 1]):
                    v = indices[k]
                    if state[v] == 0:
                        if _arc_uniform(seed, np.uint64(k), salt) < beta:
                            state[v] = 1
                            newly[nsize] = v
                            nsize += 1
            for i in range(isize):
                state[infected[i]] = 2
            for i in range(nsize):
                infected[i] = newly[i]
            if nsize > 0:
                total += nsize
                if nsize > peak:
                    peak = nsize
                    peak_time = iteration
            isize = nsize
        return total, peak, peak_time


# ---------------------------------------------------------------------------
# numpy fallback path


def _arc_uniform_numpy(run_seed, arc_indices, salt):
    z = (arc_indices.astype(np.uint64) + np.uint64(1)) * np.uint64(salt)
    z ^= np.uint64(run_seed & MASK64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) * _INV_2_53


def _frontier_arcs(indptr, indices, frontier):
    starts = indptr[frontier]
    counts = indptr[frontier + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, indices.dtype)
    pos = np.cumsum(counts) - counts
    arc_ids = np.repeat(starts - pos, counts) + np.arange(total, dtype=np.int64)
    return arc_ids, indices[arc_ids]


def _ic_single_numpy(indptr, indices, seed_node, p, run_seed):
    n = indptr.shape[0] - 1
    active = np.zeros(n, bool)
    active[seed_node] = True
    frontier = np.array([seed_node], dtype=np.int64)
    total, peak, peak_time, iteration = 1, 1, 0, 0
    while frontier.size:
        iteration += 1
        arc_ids, targets = _frontier_arcs(indptr, indices, frontier)
        cand = ~active[targets]
        arc_ids, targets = arc_ids[cand], targets[cand]
        draws = _arc_uniform_numpy(run_seed, arc_ids, _ARC_SALT_IC)
        new = np.unique(targets[draws < p])
        active[new] = True
        if new.size:
            total += new.size
            if new.size > peak:
                peak = int(new.size)
                peak_time = iteration
        frontier = new.astype(np.int64)
    return total, peak, peak_time


def _sir_single_numpy(indptr, indices, seed_node, beta, run_seed):
    n = indptr.shape[0] - 1
    state = np.zeros(n, np.int8)
    state[seed_node] = 1
    infected = np.array([seed_node], dtype=np.int64)
    total, peak, peak_time, iteration = 1, 1, 0, 0
    while infected.size:
        iteration += 1
        arc_ids, targets = _frontier_arcs(indptr, indices, infected)
        cand = state[targets] == 0
        arc_ids, targets = arc_ids[cand], targets[cand]
        draws = _arc_uniform_numpy(run_seed, arc_ids, _ARC_SALT_SIR)
        new = np.unique(targets[draws < beta])
        state[infected] = 2
        state[new] = 1
        if new.size:
            total += new.size
            if new.size > peak:
                peak = int(new.size)
                peak_time = iteration
        infected = new.astype(np.int64)
    return total, peak, peak_time


def _ic_batch_numpy(indptr, indices, nodes, t_indices, p_values, runs, master):
    from .rng import derive_seed

    npairs = nodes.shape[0]
    sum_range = np.zeros(npairs, np.int64)
    sum_peak = np.zeros(npairs, np.int64)
    sum_ptime = np.zeros(npairs, np.int64)
    for j in range(npairs):
        node, t_idx, p = int(nodes[j]), int(t_indices[j]), float(p_values[j])
        sr = sp = st = 0
        for run in range(runs):
            seed = derive_seed(master, node, t_idx, run)
            r, pk, pt = _ic_single_numpy(indptr, indices, node, p, seed)
            sr += r
            sp += pk
            st += pt
        sum_range[j] = sr
        sum_peak[j] = sp
        sum_ptime[j] = st
    return sum_range, sum_peak, sum_ptime


# ---------------------------------------------------------------------------
# dispatch


def ic_single(indptr, indices, seed_node, p, run_seed):
    if USE_NUMBA:
        return _ic_single_njit(
            indptr, indices, seed_node, p, np.uint64(run_seed & MASK64)
        )
    return _ic_single_numpy(indptr, indices, seed_node, p, run_seed & MASK64)


def sir_single(indptr, indices, seed_node, beta, run_seed):
    if USE_NUMBA:
        return _sir_single_njit(
            indptr, indices, seed_node, beta, np.uint64(run_seed & MASK64)
        )
    return _sir_single_numpy(indptr, indices, seed_node, beta, run_seed & MASK64)


def ic_batch(indptr, indices, nodes, t_indices, p_values, runs, master):
    """Per-pair sums of (range, peak, peak time) over ``runs`` cascades."""
    if USE_NUMBA:
        return _ic_batch_njit(
            indptr, indices, nodes, t_indices, p_values, runs, np.uint64(master & MASK64)
        )
    return _ic_batch_numpy(indptr, indices, nodes, t_indices, p_values, runs, master & MASK64)
