"""Label discretization for influence statistics.

Turns a 1-D vector of influence scores into integer classes where a
higher class always means a stronger spreader:

* ``smart_bins_kmeans``  - Lloyd k-means on the score distribution
* ``smart_bins_dp_exact`` - globally optimal 1-D k-means by dynamic
  programming over sorted unique values (also the test oracle for Lloyd)
* ``fixed_bins_top_percent`` - binary top-percentile labeling
* ``baseline_bins``       - plain quantile / equal-width bins
* ``select_k``            - largest class count whose smallest exact bin
  still clears a minimum occupancy
"""

import json
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .backend import HAVE_NUMBA, USE_NUMBA
from .rng import derive_seed, numpy_generator

K_MAX_DEFAULT = 5
MIN_BIN_SIZE_DEFAULT = 10
LLOYD_RESTARTS = 10
LLOYD_MAX_ITER = 300

METHODS = ("smart_kmeans", "smart_dp_exact", "fixed_top_percent", "quantile", "uniform")


class LabelingError(Exception):
    pass


class DegenerateInputError(LabelingError):
    pass


class SelectionError(LabelingError):
    pass


@dataclass(frozen=True)
class BinSpec:
    method: str
    k: int
    param: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise LabelingError(f"unknown binning method {self.method!r}")
        if self.method == "fixed_top_percent":
            if self.param is None or not 0.0 < self.param < 1.0:
                raise LabelingError("fixed_top_percent needs param in (0, 1)")
        elif self.k < 2:
            raise LabelingError(f"bin count must be >= 2, got {self.k}")


@dataclass
class LabelSet:
    labels: np.ndarray
    centroids: Optional[np.ndarray]
    boundaries: Optional[np.ndarray]
    method: BinSpec
    inertia: Optional[float] = None
    source_task: Optional[str] = None
    threshold: Optional[float] = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        counts = np.bincount(self.labels)
        if (counts == 0).any():
            raise LabelingError("labeling produced an empty class")
        if self.centroids is not None and len(self.centroids) > 1:
            if not (np.diff(self.centroids) > 0).all():
                raise LabelingError("centroids must strictly increase with class index")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def class_shares(self) -> np.ndarray:
        counts = np.bincount(self.labels)
        return counts / counts.sum()


def _validate_values(values, k) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise LabelingError("values must be a 1-D vector")
    if values.size < k:
        raise DegenerateInputError(f"{values.size} samples cannot fill {k} bins")
    if np.unique(values).size < k:
        raise DegenerateInputError(f"fewer than {k} distinct values")
    return values


# ---------------------------------------------------------------------------
# Lloyd k-means (1-D)


def _kmeanspp_init(values, k, rng):
    """Greedy k-means++: sample a few D^2-weighted candidates per step and
    keep the one that lowers the potential most."""
    n_local = 2 + int(np.log(k))
    centers = np.empty(k)
    centers[0] = values[rng.integers(values.size)]
    d2 = (values - centers[0]) ** 2
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            # all remaining mass on existing centers; pick any distinct value
            pool = np.setdiff1d(values, centers[:i])
            centers[i] = pool[0]
            continue
        cum = np.cumsum(d2)
        idx = np.searchsorted(cum, rng.random(n_local) * total, side="right")
        idx = np.minimum(idx, values.size - 1)
        best_pot, best_center, best_d2 = np.inf, values[idx[0]], None
        for c in values[idx]:
            nd2 = np.minimum(d2, (values - c) ** 2)
            pot = nd2.sum()
            if pot < best_pot:
                best_pot, best_center, best_d2 = pot, c, nd2
        centers[i] = best_center
        d2 = best_d2
    return np.sort(centers)


def _lloyd_once(values, k, rng):
    centers = _kmeanspp_init(values, k, rng)
    for _ in range(LLOYD_MAX_ITER):
        # nearest centre; equidistant points take the lower one
        dist = np.abs(values[:, None] - centers[None, :])
        labels = np.argmin(dist, axis=1)
        new_centers = centers.copy()
        for c in range(k):
            members = values[labels == c]
            if members.size:
                new_centers[c] = members.mean()
            else:
                # revive an empty cluster at the worst-fit point
                far = np.argmax(np.min(dist, axis=1))
                new_centers[c] = values[far]
        new_centers.sort()
        if np.array_equal(new_centers, centers):
            break
        centers = new_centers
    labels = np.argmin(np.abs(values[:, None] - centers[None, :]), axis=1)
    if np.bincount(labels, minlength=k).min() == 0:
        return labels, centers, np.inf
    return _refine_boundaries(values, labels, k)


def _refine_boundaries(values, labels, k):
    """Polish a converged 1-D partition by exact per-boundary descent.

    Lloyd's fixed points place boundaries at centre midpoints, which can
    sit several swaps away from the optimal contiguous split. Each sweep
    re-places every boundary at its cost-minimising position between its
    neighbours (O(1) segment costs via prefix sums) until stable.
    """
    order = np.argsort(values, kind="stable")
    sv = values[order]
    n = sv.shape[0]
    s1 = np.concatenate([[0.0], np.cumsum(sv)])
    s2 = np.concatenate([[0.0], np.cumsum(sv * sv)])

    def seg_cost(a, b):  # half-open [a, b); a may be an array
        c = b - a
        s = s1[b] - s1[a]
        return (s2[b] - s2[a]) - s * s / c

    bounds = np.concatenate([[0], np.cumsum(np.bincount(labels, minlength=k))])
    for _ in range(LLOYD_MAX_ITER):
        moved = False
        for i in range(1, k):
            lo, hi = bounds[i - 1], bounds[i + 1]
            candidates = np.arange(lo + 1, hi)
            costs = seg_cost(lo, candidates) + seg_cost(candidates, hi)
            best_idx = int(np.argmin(costs))
            current = costs[bounds[i] - (lo + 1)]
            if costs[best_idx] < current - 1e-12:
                bounds[i] = candidates[best_idx]
                moved = True
        if not moved:
            break
    sorted_labels = np.empty(n, np.int64)
    centers = np.empty(k)
    for c in range(k):
        a, b = bounds[c], bounds[c + 1]
        sorted_labels[a:b] = c
        centers[c] = (s1[b] - s1[a]) / (b - a)
    labels = np.empty(n, np.int64)
    labels[order] = sorted_labels
    inertia = float(sum(seg_cost(bounds[c], bounds[c + 1]) for c in range(k)))
    return labels, centers, inertia


def smart_bins_kmeans(
    values: Sequence[float], k: int, seed: int, n_init: int = LLOYD_RESTARTS
) -> LabelSet:
    """Cluster scores into k bins; classes are renumbered by ascending
    centroid so the top class holds the best spreaders."""
    values = _validate_values(values, k)
    best = None
    for restart in range(n_init):
        rng = numpy_generator(derive_seed(seed, restart))
        labels, centers, inertia = _lloyd_once(values, k, rng)
        if best is None or inertia < best[2] - 1e-12:
            best = (labels, centers, inertia)
    labels, centers, inertia = best
    if not np.isfinite(inertia):
        raise DegenerateInputError("no restart produced k nonempty clusters")
    order = np.argsort(centers, kind="stable")
    remap = np.empty(k, np.int64)
    remap[order] = np.arange(k)
    return LabelSet(
        labels=remap[labels],
        centroids=np.sort(centers),
        boundaries=None,
        method=BinSpec("smart_kmeans", k),
        inertia=inertia,
    )


# ---------------------------------------------------------------------------
# exact 1-D k-means via dynamic programming on sorted unique values

if HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _dp_partition_njit(s0, s1, s2, k):
        m = s0.shape[0] - 1  # prefix arrays are 1-based
        cost = np.empty((k, m + 1), np.float64)
        split = np.zeros((k, m + 1), np.int64)
        for j in range(1, m + 1):
            c = s0[j]
            mu = s1[j] / c
            cost[0, j] = s2[j] - s1[j] * mu
        for q in range(1, k):
            for j in range(q + 1, m + 1):
                best = np.inf
                arg = q
                for i in range(q, j):
                    c = s0[j] - s0[i]
                    sj = s1[j] - s1[i]
                    seg = s2[j] - s2[i] - sj * sj / c
                    total = cost[q - 1, i] + seg
                    if total < best:
                        best = total
                        arg = i
                cost[q, j] = best
                split[q, j] = arg
        return cost, split


def _dp_partition_numpy(s0, s1, s2, k):
    m = s0.shape[0] - 1
    cost = np.full((k, m + 1), np.inf)
    split = np.zeros((k, m + 1), np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        cost[0, 1:] = s2[1:] - s1[1:] ** 2 / s0[1:]
    for q in range(1, k):
        for j in range(q + 1, m + 1):
            i = np.arange(q, j)
            c = s0[j] - s0[i]
            sj = s1[j] - s1[i]
            seg = s2[j] - s2[i] - sj * sj / c
            total = cost[q - 1, i] + seg
            arg = int(np.argmin(total))
            cost[q, j] = total[arg]
            split[q, j] = q + arg
    return cost, split


def smart_bins_dp_exact(values: Sequence[float], k: int) -> LabelSet:
    """Optimal sum-of-squares partition into k contiguous intervals."""
    values = _validate_values(values, k)
    uniq, counts = np.unique(values, return_counts=True)
    m = uniq.size
    w = counts.astype(np.float64)
    s0 = np.concatenate([[0.0], np.cumsum(w)])
    s1 = np.concatenate([[0.0], np.cumsum(w * uniq)])
    s2 = np.concatenate([[0.0], np.cumsum(w * uniq * uniq)])
    if USE_NUMBA:
        cost, split = _dp_partition_njit(s0, s1, s2, k)
    else:
        cost, split = _dp_partition_numpy(s0, s1, s2, k)
    # recover interval boundaries over unique values
    bounds = [m]
    j = m
    for q in range(k - 1, 0, -1):
        j = int(split[q, j])
        bounds.append(j)
    bounds.append(0)
    bounds = bounds[::-1]
    uniq_class = np.empty(m, np.int64)
    centroids = np.empty(k)
    for cls, (a, b) in enumerate(zip(bounds, bounds[1:])):
        uniq_class[a:b] = cls
        centroids[cls] = (s1[b] - s1[a]) / (s0[b] - s0[a])
    labels = uniq_class[np.searchsorted(uniq, values)]
    return LabelSet(
        labels=labels,
        centroids=centroids,
        boundaries=None,
        method=BinSpec("smart_dp_exact", k),
        inertia=float(cost[k - 1, m]),
    )


# ---------------------------------------------------------------------------
# fixed and baseline bins


def fixed_bins_top_percent(values: Sequence[float], top_fraction: float) -> LabelSet:
    """Binary labels: class 1 is everything at or above the
    (1 - top_fraction) quantile, ties included."""
    if not 0.0 < top_fraction < 1.0:
        raise LabelingError(f"top_fraction must be in (0, 1), got {top_fraction}")
    values = np.asarray(values, dtype=np.float64)
    if np.unique(values).size < 2:
        raise DegenerateInputError("constant vector cannot be split")
    cut = np.quantile(values, 1.0 - top_fraction)
    labels = (values >= cut).astype(np.int64)
    if labels.min() == labels.max():
        raise DegenerateInputError("top-percent cut produced a single class")
    return LabelSet(
        labels=labels,
        centroids=None,
        boundaries=np.array([cut]),
        method=BinSpec("fixed_top_percent", 2, top_fraction),
    )


def baseline_bins(values: Sequence[float], k: int, kind: str) -> LabelSet:
    """Quantile (equal-count) or uniform (equal-width) discretization."""
    if kind not in ("quantile", "uniform"):
        raise LabelingError(f"kind must be quantile or uniform, got {kind!r}")
    if k < 2:
        raise LabelingError("k must be >= 2")
    values = np.asarray(values, dtype=np.float64)
    if np.unique(values).size < 2:
        raise DegenerateInputError("constant vector cannot be binned")
    if kind == "quantile":
        edges = np.quantile(values, np.arange(1, k) / k)
    else:
        lo, hi = values.min(), values.max()
        edges = lo + (hi - lo) * np.arange(1, k) / k
    labels = np.searchsorted(edges, values, side="left").astype(np.int64)
    present = np.unique(labels)
    if present.size < k:
        warnings.warn(f"{kind} binning left {k - present.size} empty bins; merged rightward")
        remap = np.zeros(k, np.int64)
        remap[present] = np.arange(present.size)
        labels = remap[labels]
    return LabelSet(
        labels=labels,
        centroids=None,
        boundaries=edges,
        method=BinSpec(kind, k),
    )


def select_k(
    values: Sequence[float],
    k_max: int = K_MAX_DEFAULT,
    min_bin_size: int = MIN_BIN_SIZE_DEFAULT,
) -> int:
    """Largest k <= k_max whose exact partition keeps every bin at or
    above ``min_bin_size`` members; 2 when nothing qualifies."""
    if k_max < 2:
        raise SelectionError("k_max must be >= 2")
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2 * min_bin_size:
        raise SelectionError(
            f"{values.size} samples cannot support two bins of {min_bin_size}"
        )
    n_distinct = np.unique(values).size
    for k in range(k_max, 1, -1):
        if n_distinct < k:
            continue
        ls = smart_bins_dp_exact(values, k)
        if np.bincount(ls.labels).min() >= min_bin_size:
            return k
    return 2


# ---------------------------------------------------------------------------
# persistence


def save_labelset(ls: LabelSet, nodes: Sequence[int], csv_path, json_path, seed=None) -> None:
    task = ls.source_task if ls.source_task is not None else ""
    thr = repr(float(ls.threshold)) if ls.threshold is not None else ""
    with open(csv_path, "wt", encoding="utf-8") as fh:
        fh.write("node,threshold,task,label\n")
        for node, label in zip(nodes, ls.labels):
            fh.write(f"{node},{thr},{task},{label}\n")
    meta = {
        "method": ls.method.method,
        "k": ls.method.k,
        "param": ls.method.param,
        "centroids": None if ls.centroids is None else [float(x) for x in ls.centroids],
        "boundaries": None if ls.boundaries is None else [float(x) for x in ls.boundaries],
        "inertia": ls.inertia,
        "task": ls.source_task,
        "threshold": ls.threshold,
        "seed": seed,
    }
    with open(json_path, "wt", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
