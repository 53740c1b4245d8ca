"""Directed simple-graph container and dataset ingestion.

Graphs are stored as CSR adjacency in both directions with contiguous
node ids. Construction deduplicates edges and drops self loops; the
structure is immutable afterwards, so it is safe to share across worker
threads. Undirected inputs are materialised as two directed arcs.
"""

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _path_kernels as paths

_CACHE_MAGIC = "keynode-graph-cache-v1"


class GraphError(Exception):
    pass


class EdgeListParseError(GraphError):
    def __init__(self, path, line_number, message):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class StatsError(GraphError):
    pass


@dataclass(frozen=True)
class Graph:
    n: int
    directed: bool
    out_indptr: np.ndarray
    out_indices: np.ndarray
    in_indptr: np.ndarray
    in_indices: np.ndarray
    node_names: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        for arr in (self.out_indptr, self.out_indices, self.in_indptr, self.in_indices):
            arr.setflags(write=False)

    @property
    def arc_count(self) -> int:
        return int(self.out_indices.shape[0])

    @property
    def edge_count(self) -> int:
        """Edges as loaded: arcs when directed, arc pairs otherwise."""
        return self.arc_count if self.directed else self.arc_count // 2

    def out_neighbors(self, u: int) -> np.ndarray:
        return self.out_indices[self.out_indptr[u] : self.out_indptr[u + 1]]

    def in_neighbors(self, u: int) -> np.ndarray:
        return self.in_indices[self.in_indptr[u] : self.in_indptr[u + 1]]

    def out_degrees(self) -> np.ndarray:
        return np.diff(self.out_indptr)

    def in_degrees(self) -> np.ndarray:
        return np.diff(self.in_indptr)

    @cached_property
    def undirected(self):
        """Undirected projection as (indptr, indices) CSR."""
        if not self.directed:
            return self.out_indptr, self.out_indices
        src = np.repeat(np.arange(self.n, dtype=np.int32), np.diff(self.out_indptr))
        dst = self.out_indices.astype(np.int32)
        u = np.concatenate([src, dst])
        v = np.concatenate([dst, src])
        return _build_csr(self.n, u, v)

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(b"keynode-graph-v1")
        h.update(np.array([self.n, int(self.directed)], dtype=np.int64).tobytes())
        h.update(self.out_indptr.astype(np.int64).tobytes())
        h.update(self.out_indices.astype(np.int64).tobytes())
        return h.hexdigest()


@dataclass
class GraphStats:
    nodes: int
    edges: int
    avg_degree: float
    clustering_coefficient: float
    diameter: Optional[int]
    transitivity: float


def _build_csr(n, src, dst):
    """Sorted, deduplicated CSR from parallel arc arrays."""
    if src.size == 0:
        return np.zeros(n + 1, np.int64), np.empty(0, np.int32)
    key = src.astype(np.int64) * n + dst.astype(np.int64)
    key = np.unique(key)
    src_u = (key // n).astype(np.int32)
    dst_u = (key % n).astype(np.int32)
    indptr = np.zeros(n + 1, np.int64)
    np.add.at(indptr, src_u + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst_u


def from_edges(
    edges: Iterable[Sequence[int]],
    n: Optional[int] = None,
    directed: bool = True,
    node_names: Optional[Sequence[str]] = None,
) -> Graph:
    """Build a Graph from (u, v) integer pairs.

    Self loops and duplicates are dropped. Undirected edges become two arcs.
    """
    pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if pairs.size:
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if n is None:
        n = int(pairs.max()) + 1 if pairs.size else 0
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
        raise GraphError("edge endpoint outside 0..n-1")
    src, dst = pairs[:, 0], pairs[:, 1]
    if not directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    out_indptr, out_indices = _build_csr(n, src, dst)
    in_indptr, in_indices = _build_csr(n, dst, src)
    names = tuple(node_names) if node_names is not None else None
    return Graph(n, directed, out_indptr, out_indices, in_indptr, in_indices, names)


def load_edge_list(path, directed: bool = True) -> Graph:
    """Read a two-column edge list; tokens may be arbitrary strings.

    Accepts whitespace- or comma-separated columns and '#' comment lines.
    String ids are remapped to 0..n-1 in first-appearance order.
    """
    path = Path(path)
    ids = {}
    src, dst = [], []
    try:
        fh = open(path, "rt", encoding="utf-8")
    except OSError as exc:
        raise GraphError(f"cannot read edge list {path}: {exc}") from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.replace(",", " ").split()
            if len(tokens) < 2:
                raise EdgeListParseError(path, lineno, f"expected 2 tokens, got {len(tokens)}")
            a, b = tokens[0], tokens[1]
            for tok in (a, b):
                if tok not in ids:
                    ids[tok] = len(ids)
            src.append(ids[a])
            dst.append(ids[b])
    names = [None] * len(ids)
    for name, i in ids.items():
        names[i] = name
    return from_edges(zip(src, dst), n=len(ids), directed=directed, node_names=names)


def save_edge_list(g: Graph, path) -> None:
    """Write the graph back out; undirected edges are written once."""
    path = Path(path)
    with open(path, "wt", encoding="utf-8") as fh:
        for u in range(g.n):
            for v in g.out_neighbors(u):
                v = int(v)
                if not g.directed and v < u:
                    continue
                if g.node_names is not None:
                    fh.write(f"{g.node_names[u]} {g.node_names[v]}\n")
                else:
                    fh.write(f"{u} {v}\n")


def save_binary(g: Graph, path) -> None:
    np.savez_compressed(
        path,
        magic=np.array([_CACHE_MAGIC]),
        meta=np.array([g.n, int(g.directed)], dtype=np.int64),
        out_indptr=g.out_indptr,
        out_indices=g.out_indices,
        names=np.array(g.node_names if g.node_names is not None else [], dtype=object),
    )


def load_binary(path) -> Graph:
    with np.load(path, allow_pickle=True) as data:
        if "magic" not in data or str(data["magic"][0]) != _CACHE_MAGIC:
            raise GraphError(f"{path}: not a graph cache file (bad header)")
        n, directed = (int(x) for x in data["meta"])
        out_indptr = data["out_indptr"]
        out_indices = data["out_indices"]
        names = [str(x) for x in data["names"]] or None
    src = np.repeat(np.arange(n, dtype=np.int32), np.diff(out_indptr))
    in_indptr, in_indices = _build_csr(n, out_indices.astype(np.int32), src)
    g = Graph(n, bool(directed), out_indptr, out_indices, in_indptr, in_indices,
              tuple(names) if names else None)
    return g


def generate_synthetic(model: str, n: int, param, seed: int) -> Graph:
    """Deterministic synthetic graphs for fixtures.

    model='erdos_renyi': param is the edge probability p.
    model='barabasi_albert': param is the attachment count m.
    Both produce undirected simple graphs (stored as symmetric arcs).
    """
    if n < 1:
        raise GraphError("n must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    if model == "erdos_renyi":
        p = float(param)
        if not 0.0 <= p <= 1.0:
            raise GraphError(f"erdos_renyi needs p in [0,1], got {p}")
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(iu.shape[0]) < p
        edges = np.stack([iu[mask], ju[mask]], axis=1)
        return from_edges(edges, n=n, directed=False)
    if model == "barabasi_albert":
        m = int(param)
        if m < 1 or m >= n:
            raise GraphError(f"barabasi_albert needs 1 <= m < n, got m={m}, n={n}")
        repeated = []
        targets = list(range(m))
        edges = []
        for new in range(m, n):
            for t in targets:
                edges.append((new, t))
            repeated.extend(targets)
            repeated.extend([new] * m)
            chosen = set()
            while len(chosen) < m:
                chosen.add(repeated[rng.integers(0, len(repeated))])
            targets = sorted(chosen)
        return from_edges(edges, n=n, directed=False)
    raise GraphError(f"unknown synthetic model {model!r}")


def reachable_set(g: Graph, source: int) -> set:
    """Nodes reachable from ``source`` along directed paths, source included."""
    if not 0 <= source < g.n:
        raise GraphError(f"node id {source} out of range")
    dist = paths.bfs_distances(g.out_indptr, g.out_indices, source, g.n)
    return set(int(v) for v in np.flatnonzero(dist >= 0))


def bfs_distances(g: Graph, source: int, reverse: bool = False) -> np.ndarray:
    """Hop distances from source (-1 unreachable); reverse follows in-arcs."""
    if not 0 <= source < g.n:
        raise GraphError(f"node id {source} out of range")
    if reverse:
        return paths.bfs_distances(g.in_indptr, g.in_indices, source, g.n)
    return paths.bfs_distances(g.out_indptr, g.out_indices, source, g.n)


def weakly_connected_components(g: Graph) -> np.ndarray:
    """Component label per node on the undirected projection."""
    indptr, indices = g.undirected
    labels = np.full(g.n, -1, np.int64)
    current = 0
    for start in range(g.n):
        if labels[start] >= 0:
            continue
        dist = paths.bfs_distances(indptr, indices, start, g.n)
        labels[dist >= 0] = current
        current += 1
    return labels


def _triangle_stats(indptr, indices, n):
    """Per-node triangle counts on a symmetric CSR (python loop, set based)."""
    neigh = [set(indices[indptr[v] : indptr[v + 1]].tolist()) for v in range(n)]
    tri = np.zeros(n, np.int64)
    for v in range(n):
        nv = neigh[v]
        t = 0
        for w in nv:
            t += len(nv & neigh[w])
        tri[v] = t // 2
    return tri


def compute_stats(g: Graph, diameter_on_largest_component: bool = False) -> GraphStats:
    """Topology summary on the undirected projection.

    The diameter is exact (all-source BFS). It is reported as None for a
    disconnected graph unless ``diameter_on_largest_component`` is set,
    in which case the largest weakly connected component is measured.
    """
    if g.n == 0:
        raise StatsError("cannot compute stats of an empty graph")
    indptr, indices = g.undirected
    und_edges = int(indices.shape[0]) // 2
    degrees = np.diff(indptr)
    avg_degree = float(indices.shape[0]) / g.n
    tri = _triangle_stats(indptr, indices, g.n)
    pairs = degrees.astype(np.int64) * (degrees.astype(np.int64) - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(pairs > 0, 2.0 * tri / pairs, 0.0)
    clustering = float(local.mean())
    transitivity = float(2.0 * tri.sum() / pairs.sum()) if pairs.sum() > 0 else 0.0

    labels = weakly_connected_components(g)
    n_components = int(labels.max()) + 1
    diameter = None
    if n_components == 1:
        _, _, _, ecc = paths.sssp_aggregates(indptr, indices, g.n)
        diameter = int(ecc.max())
    elif diameter_on_largest_component:
        sizes = np.bincount(labels)
        members = np.flatnonzero(labels == int(sizes.argmax()))
        remap = np.full(g.n, -1, np.int64)
        remap[members] = np.arange(members.size)
        sub_edges = []
        for u in members:
            for v in indices[indptr[u] : indptr[u + 1]]:
                sub_edges.append((remap[u], remap[int(v)]))
        sub = from_edges(sub_edges, n=members.size, directed=True)
        _, _, _, ecc = paths.sssp_aggregates(sub.out_indptr, sub.out_indices, sub.n)
        diameter = int(ecc.max())

    return GraphStats(
        nodes=g.n,
        edges=g.edge_count if g.directed else und_edges,
        avg_degree=avg_degree,
        clustering_coefficient=clustering,
        diameter=diameter,
        transitivity=transitivity,
    )
