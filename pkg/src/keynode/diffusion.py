"""Independent-cascade simulation with deterministic Monte Carlo aggregation.

A cascade starts with the seed active at iteration 0; every newly
activated node gets exactly one chance to activate each currently
inactive out-neighbor, with fixed probability p. Outcomes track three
quantities per run: range (nodes activated, seed included), peak
(largest single-iteration activation count, the seed's own iteration
counts 1) and peak time (iteration index of the peak).

``run_sir_gamma1`` is an independently written discrete-time
susceptible/infected/recovered process whose one-step recovery makes it
the same process as the cascade model; the two are cross-checked
statistically in the test suite.
"""

import json
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import _cascade_kernels as kernels
from .backend import backend_name, get_threads, set_threads
from .graph import Graph, GraphError
from .rng import RNG_NAME, derive_seed

DEFAULT_RUNS = 100

CITATION_THRESHOLDS = (0.2, 0.3, 0.4)
SOCIAL_THRESHOLDS = (0.1, 0.15, 0.2)

_BLOCK_PAIRS = 2048  # (node, threshold) pairs per kernel invocation


@dataclass(frozen=True)
class CascadeOutcome:
    range: int
    peak: int
    peak_time: int


@dataclass(frozen=True)
class SimulationRecord:
    node: int
    threshold: float
    runs: int
    mean_range: float
    mean_peak: float
    mean_peak_time: float


@dataclass(frozen=True)
class ThresholdSet:
    values: tuple
    network_family: str = "custom"

    def __post_init__(self):
        if not self.values:
            raise ValueError("threshold set must be nonempty")
        for p in self.values:
            if not 0.0 < p <= 1.0:
                raise ValueError(f"activation threshold {p} outside (0, 1]")

    @classmethod
    def citation(cls) -> "ThresholdSet":
        return cls(CITATION_THRESHOLDS, "citation")

    @classmethod
    def social(cls) -> "ThresholdSet":
        return cls(SOCIAL_THRESHOLDS, "social")

    @classmethod
    def for_family(cls, family: str) -> "ThresholdSet":
        if family == "citation":
            return cls.citation()
        if family == "social":
            return cls.social()
        raise ValueError(f"no default thresholds for family {family!r}")


def _check_node(g: Graph, node: int) -> None:
    if not 0 <= node < g.n:
        raise GraphError(f"node id {node} out of range 0..{g.n - 1}")


def run_cascade(g: Graph, seed_node: int, p: float, rng_seed: int) -> CascadeOutcome:
    """One synchronous cascade; deterministic for a fixed rng_seed."""
    _check_node(g, seed_node)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"activation probability {p} outside [0, 1]")
    r, pk, pt = kernels.ic_single(g.out_indptr, g.out_indices, seed_node, p, rng_seed)
    return CascadeOutcome(int(r), int(pk), int(pt))


def run_sir_gamma1(g: Graph, seed_node: int, beta: float, rng_seed: int) -> CascadeOutcome:
    """One epidemic run with infection rate beta and one-step recovery."""
    _check_node(g, seed_node)
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"infection rate {beta} outside [0, 1]")
    r, pk, pt = kernels.sir_single(g.out_indptr, g.out_indices, seed_node, beta, rng_seed)
    return CascadeOutcome(int(r), int(pk), int(pt))


def simulate_node(
    g: Graph,
    node: int,
    p: float,
    runs: int = DEFAULT_RUNS,
    master_seed: int = 0,
    threshold_index: int = 0,
) -> SimulationRecord:
    """Aggregate ``runs`` cascades from one node at one threshold.

    Per-run seeds are hashes of (master_seed, node, threshold_index, run),
    so the result is identical no matter how runs are scheduled.
    """
    _check_node(g, node)
    if runs < 1:
        raise ValueError("runs must be >= 1")
    nodes = np.array([node], np.int32)
    t_idx = np.array([threshold_index], np.int32)
    p_arr = np.array([p], np.float64)
    sr, sp, st = kernels.ic_batch(
        g.out_indptr, g.out_indices, nodes, t_idx, p_arr, runs, master_seed
    )
    return SimulationRecord(
        node=node,
        threshold=p,
        runs=runs,
        mean_range=float(sr[0] / runs),
        mean_peak=float(sp[0] / runs),
        mean_peak_time=float(st[0] / runs),
    )


def simulate_all(
    g: Graph,
    thresholds: ThresholdSet,
    runs: int = DEFAULT_RUNS,
    master_seed: int = 0,
    threads: Optional[int] = None,
    progress: Optional[Callable[[int, int], None]] = None,
) -> List[SimulationRecord]:
    """One record per (node, threshold), ordered node-major.

    Output is byte-identical regardless of worker count: each (node,
    threshold, run) cell owns its random stream and its result slot.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    if threads is not None:
        previous = get_threads()
        set_threads(threads)
    tvals = list(thresholds.values)
    nt = len(tvals)
    total_pairs = g.n * nt
    nodes = np.repeat(np.arange(g.n, dtype=np.int32), nt)
    t_idx = np.tile(np.arange(nt, dtype=np.int32), g.n)
    p_arr = np.array(tvals, np.float64)[t_idx]

    sum_r = np.empty(total_pairs, np.int64)
    sum_p = np.empty(total_pairs, np.int64)
    sum_t = np.empty(total_pairs, np.int64)
    try:
        for lo in range(0, total_pairs, _BLOCK_PAIRS):
            hi = min(total_pairs, lo + _BLOCK_PAIRS)
            sr, sp, st = kernels.ic_batch(
                g.out_indptr,
                g.out_indices,
                nodes[lo:hi],
                t_idx[lo:hi],
                p_arr[lo:hi],
                runs,
                master_seed,
            )
            sum_r[lo:hi] = sr
            sum_p[lo:hi] = sp
            sum_t[lo:hi] = st
            if progress is not None:
                progress(hi, total_pairs)
    finally:
        if threads is not None:
            set_threads(previous)

    records = []
    for j in range(total_pairs):
        records.append(
            SimulationRecord(
                node=int(nodes[j]),
                threshold=float(p_arr[j]),
                runs=runs,
                mean_range=float(sum_r[j] / runs),
                mean_peak=float(sum_p[j] / runs),
                mean_peak_time=float(sum_t[j] / runs),
            )
        )
    return records


# ---------------------------------------------------------------------------
# persistence

CSV_HEADER = "node,threshold,runs,mean_range,mean_peak,mean_peak_time"


def records_to_csv(records: Sequence[SimulationRecord]) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.node},{r.threshold!r},{r.runs},"
            f"{r.mean_range!r},{r.mean_peak!r},{r.mean_peak_time!r}"
        )
    return "\n".join(lines) + "\n"


def save_records(records: Sequence[SimulationRecord], path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write(records_to_csv(records))


def load_records(path) -> List[SimulationRecord]:
    records = []
    with open(path, "rt", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected simulation CSV header {header!r}")
        for line in fh:
            node, thr, runs, mr, mp, mt = line.strip().split(",")
            records.append(
                SimulationRecord(int(node), float(thr), int(runs), float(mr), float(mp), float(mt))
            )
    return records


def simulation_sidecar(
    g: Graph, thresholds: ThresholdSet, runs: int, master_seed: int
) -> dict:
    """Reproducibility metadata persisted next to the results CSV."""
    return {
        "master_seed": master_seed,
        "rng": RNG_NAME,
        "backend": backend_name(),
        "thresholds": list(thresholds.values),
        "network_family": thresholds.network_family,
        "runs": runs,
        "graph_checksum": g.checksum(),
        "range_includes_seed": True,
        "direction": "directed-out",
    }


def save_sidecar(sidecar: dict, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def derive_run_seed(master_seed: int, node: int, threshold_index: int, run_index: int) -> int:
    """Per-run seed; exposed for tests that replay single cascades."""
    return derive_seed(master_seed, node, threshold_index, run_index)
