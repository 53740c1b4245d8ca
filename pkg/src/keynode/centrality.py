"""Node centrality measures.

Fourteen measures computed per node, exposed one at a time and as an
ordered batch. Direction conventions (recorded in the batch sidecar):

* degree counts both arc directions; in/out split as usual
* average neighbour degree looks at out-neighbors' total degree
* closeness, harmonic and local reaching follow outgoing distances;
  closeness uses the component-scaled (Wasserman-Faust) form
* betweenness and load run on the directed graph, normalised by
  (n-1)(n-2) when n >= 3
* clustering coefficient, core number and eigenvector use the
  undirected projection; eigenvector runs shifted power iteration
  (A + I), which converges on any connected projection
* pagerank follows in-arcs with damping 0.85
* vote rank: voting ability starts at 1, a node's votes come from its
  in-neighbors, each selection weakens the winner's voters by one over
  the mean out-degree; selected nodes score (n - rank)/n, others 0
"""

import csv
import json
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import _path_kernels as paths
from .graph import Graph, _triangle_stats


class CentralityError(Exception):
    pass


class ConvergenceError(CentralityError):
    pass


class CentralityId(Enum):
    degree = 0
    in_degree = 1
    out_degree = 2
    avg_neighbor_degree = 3
    closeness = 4
    betweenness = 5
    local_reaching = 6
    vote_rank = 7
    load = 8
    clustering_coefficient = 9
    core_number = 10
    eigenvector = 11
    pagerank = 12
    harmonic = 13


CENTRALITY_ORDER = tuple(CentralityId)

PAGERANK_DAMPING = 0.85
PAGERANK_TOL = 1e-9
EIGENVECTOR_TOL = 1e-6
EIGENVECTOR_MAX_ITER = 1000
ROUND_DECIMALS = 10  # path-based accumulations rounded for determinism


@dataclass(frozen=True)
class NodeScoreMap:
    measure: CentralityId
    scores: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.scores)):
            raise CentralityError(f"{self.measure.name}: non-finite scores")
        self.scores.setflags(write=False)


def _degree(g: Graph):
    return (g.out_degrees() + g.in_degrees()).astype(np.float64)


def _avg_neighbor_degree(g: Graph):
    total = g.out_degrees() + g.in_degrees()
    out_deg = g.out_degrees()
    src = np.repeat(np.arange(g.n), out_deg)
    sums = np.bincount(src, weights=total[g.out_indices], minlength=g.n)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(out_deg > 0, sums / out_deg, 0.0)


def _sssp_stats(g: Graph):
    return paths.sssp_aggregates(g.out_indptr, g.out_indices, g.n)


def _closeness(g: Graph):
    if g.n < 2:
        return np.zeros(g.n)
    reach, dist_sum, _, _ = _sssp_stats(g)
    out = np.zeros(g.n)
    ok = dist_sum > 0
    out[ok] = (reach[ok] / (g.n - 1)) * (reach[ok] / dist_sum[ok])
    return out


def _harmonic(g: Graph):
    _, _, inv_sum, _ = _sssp_stats(g)
    return inv_sum.copy()


def _local_reaching(g: Graph):
    if g.n < 2:
        return np.zeros(g.n)
    reach, _, _, _ = _sssp_stats(g)
    return reach / float(g.n - 1)


def _betweenness(g: Graph):
    raw = paths.betweenness_raw(
        g.out_indptr, g.out_indices, g.in_indptr, g.in_indices, g.n
    )
    return _pairwise_normalize(raw, g.n, "betweenness")


def _load(g: Graph):
    raw = paths.load_raw(g.out_indptr, g.out_indices, g.in_indptr, g.in_indices, g.n)
    return _pairwise_normalize(raw, g.n, "load")


def _pairwise_normalize(raw, n, name):
    if n < 3:
        warnings.warn(f"{name}: n < 3, returning unnormalised values")
        return np.round(raw, ROUND_DECIMALS)
    return np.round(raw / ((n - 1) * (n - 2)), ROUND_DECIMALS)


def _clustering(g: Graph):
    indptr, indices = g.undirected
    tri = _triangle_stats(indptr, indices, g.n)
    deg = np.diff(indptr)
    pairs = deg.astype(np.int64) * (deg.astype(np.int64) - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pairs > 0, 2.0 * tri / pairs, 0.0)


def _core_number(g: Graph):
    """Peeling (bucket) algorithm on the undirected projection."""
    indptr, indices = g.undirected
    n = g.n
    deg = np.diff(indptr).astype(np.int64)
    if n == 0:
        return np.zeros(0)
    md = int(deg.max()) if n else 0
    bin_start = np.zeros(md + 2, np.int64)
    np.add.at(bin_start, deg + 1, 1)
    np.cumsum(bin_start, out=bin_start)
    vert = np.argsort(deg, kind="stable").astype(np.int64)
    pos = np.empty(n, np.int64)
    pos[vert] = np.arange(n)
    cur_bin = bin_start[:-1].copy()
    core = deg.copy()
    for i in range(n):
        v = vert[i]
        for u in indices[indptr[v] : indptr[v + 1]]:
            u = int(u)
            if core[u] > core[v]:
                du = core[u]
                pu = pos[u]
                pw = cur_bin[du]
                w = vert[pw]
                if u != w:
                    vert[pu], vert[pw] = w, u
                    pos[u], pos[w] = pw, pu
                cur_bin[du] += 1
                core[u] -= 1
    return core.astype(np.float64)


def _eigenvector(g: Graph):
    indptr, indices = g.undirected
    n = g.n
    if n == 0:
        return np.zeros(0)
    src = np.repeat(np.arange(n), np.diff(indptr))
    x = np.full(n, 1.0 / np.sqrt(n))
    for _ in range(EIGENVECTOR_MAX_ITER):
        y = x + np.bincount(src, weights=x[indices], minlength=n)
        y /= np.linalg.norm(y)
        if np.abs(y - x).max() < EIGENVECTOR_TOL:
            return y
        x = y
    raise ConvergenceError(
        f"eigenvector power iteration did not converge in {EIGENVECTOR_MAX_ITER} steps"
    )


def _pagerank(g: Graph, damping=PAGERANK_DAMPING, tol=PAGERANK_TOL, max_iter=1000):
    n = g.n
    if n == 0:
        return np.zeros(0)
    out_deg = g.out_degrees().astype(np.float64)
    src = np.repeat(np.arange(n), g.out_degrees())
    dangling = out_deg == 0
    x = np.full(n, 1.0 / n)
    base = (1.0 - damping) / n
    for _ in range(max_iter):
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.where(dangling, 0.0, x / np.where(out_deg > 0, out_deg, 1.0))
        y = np.bincount(g.out_indices, weights=share[src], minlength=n)
        y = base + damping * (y + x[dangling].sum() / n)
        if np.abs(y - x).sum() < tol:
            return y
        x = y
    raise ConvergenceError(f"pagerank did not converge in {max_iter} iterations")


def _vote_rank(g: Graph):
    n = g.n
    if n == 0:
        return np.zeros(0)
    if g.arc_count == 0:
        return np.zeros(n)
    weaken = 1.0 / (g.arc_count / n)  # one over mean out-degree
    ability = np.ones(n)
    selected = np.zeros(n, bool)
    src = np.repeat(np.arange(n), g.out_degrees())
    scores = np.zeros(n)
    rank = 0
    while rank < n:
        votes = np.bincount(g.out_indices, weights=ability[src], minlength=n)
        votes[selected] = -1.0
        winner = int(np.argmax(votes))
        if votes[winner] <= 0.0:
            break
        scores[winner] = (n - rank) / n
        selected[winner] = True
        ability[winner] = 0.0
        voters = g.in_neighbors(winner)
        ability[voters] = np.maximum(0.0, ability[voters] - weaken)
        rank += 1
    return scores


_DISPATCH = {
    CentralityId.degree: _degree,
    CentralityId.in_degree: lambda g: g.in_degrees().astype(np.float64),
    CentralityId.out_degree: lambda g: g.out_degrees().astype(np.float64),
    CentralityId.avg_neighbor_degree: _avg_neighbor_degree,
    CentralityId.closeness: _closeness,
    CentralityId.betweenness: _betweenness,
    CentralityId.local_reaching: _local_reaching,
    CentralityId.vote_rank: _vote_rank,
    CentralityId.load: _load,
    CentralityId.clustering_coefficient: _clustering,
    CentralityId.core_number: _core_number,
    CentralityId.eigenvector: _eigenvector,
    CentralityId.pagerank: _pagerank,
    CentralityId.harmonic: _harmonic,
}


def compute_centrality(g: Graph, measure: CentralityId) -> NodeScoreMap:
    if g.n < 1:
        raise CentralityError("graph has no nodes")
    try:
        scores = np.asarray(_DISPATCH[measure](g), dtype=np.float64)
    except CentralityError:
        raise
    except Exception as exc:
        raise CentralityError(f"{measure.name}: {exc}") from exc
    return NodeScoreMap(measure, scores)


def compute_all_centralities(
    g: Graph, cache_dir: Optional[Path] = None
) -> List[NodeScoreMap]:
    """All fourteen measures in CentralityId order.

    When ``cache_dir`` is given, results are persisted per graph checksum
    and reloaded on later calls; path-based measures dominate runtime on
    the larger networks.
    """
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cached = _load_cache(cache_dir, g)
        if cached is not None:
            return cached
    maps = [compute_centrality(g, measure) for measure in CENTRALITY_ORDER]
    if cache_dir is not None:
        _save_cache(cache_dir, g, maps)
    return maps


def scores_by_measure(maps: List[NodeScoreMap]) -> Dict[CentralityId, np.ndarray]:
    return {m.measure: m.scores for m in maps}


# ---------------------------------------------------------------------------
# disk cache

CACHE_VERSION = 1


def _cache_paths(cache_dir: Path, g: Graph):
    stem = f"centralities_{g.checksum()[:16]}"
    return cache_dir / f"{stem}.csv", cache_dir / f"{stem}.json"


def _save_cache(cache_dir: Path, g: Graph, maps: List[NodeScoreMap]) -> None:
    cache_dir.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = _cache_paths(cache_dir, g)
    with open(csv_path, "wt", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node"] + [m.name for m in CENTRALITY_ORDER])
        columns = [m.scores for m in maps]
        for v in range(g.n):
            writer.writerow([v] + [repr(float(col[v])) for col in columns])
    meta = {
        "version": CACHE_VERSION,
        "graph_checksum": g.checksum(),
        "measures": [m.name for m in CENTRALITY_ORDER],
        "pagerank_damping": PAGERANK_DAMPING,
        "pagerank_tol": PAGERANK_TOL,
        "eigenvector_tol": EIGENVECTOR_TOL,
        "conventions": {
            "distances": "outgoing",
            "eigenvector": "undirected projection, shifted power iteration",
            "clustering_core": "undirected projection",
            "vote_rank": "in-neighbor votes, (n-rank)/n scores",
        },
    }
    with open(json_path, "wt", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_cache(cache_dir: Path, g: Graph) -> Optional[List[NodeScoreMap]]:
    csv_path, json_path = _cache_paths(cache_dir, g)
    if not (csv_path.exists() and json_path.exists()):
        return None
    with open(json_path, "rt", encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("graph_checksum") != g.checksum() or meta.get("version") != CACHE_VERSION:
        return None
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (g.n, 15):
        return None
    return [
        NodeScoreMap(measure, np.ascontiguousarray(data[:, i + 1]))
        for i, measure in enumerate(CENTRALITY_ORDER)
    ]
