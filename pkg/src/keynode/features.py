"""Per-sample embeddings: fourteen centrality columns plus the
activation threshold, with z-score standardization.

A sample is a (node, threshold) pair; rows are node-major. The scaler
records per-column mean and population standard deviation; constant
columns pass through unchanged and are flagged.
"""

import json
from dataclasses import dataclass, replace
from typing import List

import numpy as np

from .centrality import CENTRALITY_ORDER, NodeScoreMap
from .diffusion import ThresholdSet

FEATURE_NAMES = tuple(m.name for m in CENTRALITY_ORDER) + ("threshold",)
N_FEATURES = len(FEATURE_NAMES)  # 15


class FeatureError(Exception):
    pass


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # bool mask of zero-variance columns

    def to_json(self) -> dict:
        return {
            "feature_names": list(FEATURE_NAMES),
            "mean": [float(x) for x in self.mean],
            "std": [float(x) for x in self.std],
            "constant": [bool(x) for x in self.constant],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Scaler":
        if tuple(data["feature_names"]) != FEATURE_NAMES:
            raise FeatureError("scaler feature names do not match current layout")
        return cls(
            mean=np.array(data["mean"], np.float64),
            std=np.array(data["std"], np.float64),
            constant=np.array(data["constant"], bool),
        )


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    node_ids: np.ndarray
    thresholds: np.ndarray
    feature_names: tuple = FEATURE_NAMES
    standardized: bool = False

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.feature_names):
            raise FeatureError(
                f"feature matrix must have {len(self.feature_names)} columns"
            )
        if not (self.values.shape[0] == self.node_ids.shape[0] == self.thresholds.shape[0]):
            raise FeatureError("row key arrays out of sync with value rows")

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    def take(self, rows) -> "FeatureMatrix":
        rows = np.asarray(rows)
        return replace(
            self,
            values=self.values[rows],
            node_ids=self.node_ids[rows],
            thresholds=self.thresholds[rows],
        )


def assemble_features(
    centralities: List[NodeScoreMap], thresholds: ThresholdSet
) -> FeatureMatrix:
    """Raw embedding: row (v, p) = 14 centrality values of v, then p."""
    by_measure = {m.measure: m.scores for m in centralities}
    missing = [m.name for m in CENTRALITY_ORDER if m not in by_measure]
    if missing:
        raise FeatureError(f"missing centrality measures: {', '.join(missing)}")
    lengths = {scores.shape[0] for scores in by_measure.values()}
    if len(lengths) != 1:
        raise FeatureError(f"inconsistent score lengths: {sorted(lengths)}")
    n = lengths.pop()
    tvals = np.asarray(thresholds.values, np.float64)
    nt = tvals.shape[0]
    base = np.column_stack([by_measure[m] for m in CENTRALITY_ORDER])
    values = np.empty((n * nt, N_FEATURES), np.float64)
    values[:, :-1] = np.repeat(base, nt, axis=0)
    values[:, -1] = np.tile(tvals, n)
    node_ids = np.repeat(np.arange(n, dtype=np.int64), nt)
    return FeatureMatrix(values=values, node_ids=node_ids, thresholds=np.tile(tvals, n))


def fit_standardizer(m: FeatureMatrix) -> Scaler:
    if m.n_rows < 2:
        raise FeatureError("need at least 2 rows to fit a standardizer")
    mean = m.values.mean(axis=0)
    std = m.values.std(axis=0)  # population (ddof=0)
    constant = std == 0.0
    return Scaler(mean=mean, std=np.where(constant, 1.0, std), constant=constant)


def apply_standardizer(m: FeatureMatrix, scaler: Scaler) -> FeatureMatrix:
    if m.n_rows == 0:
        raise FeatureError("cannot standardize an empty matrix")
    z = (m.values - scaler.mean) / scaler.std
    z[:, scaler.constant] = m.values[:, scaler.constant]
    return replace(m, values=z, standardized=True)


def invert_standardizer(m: FeatureMatrix, scaler: Scaler) -> FeatureMatrix:
    x = m.values * scaler.std + scaler.mean
    x[:, scaler.constant] = m.values[:, scaler.constant]
    return replace(m, values=x, standardized=False)


# ---------------------------------------------------------------------------
# persistence


def save_features(m: FeatureMatrix, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write("node,threshold," + ",".join(m.feature_names) + "\n")
        for i in range(m.n_rows):
            row = ",".join(repr(float(x)) for x in m.values[i])
            fh.write(f"{int(m.node_ids[i])},{float(m.thresholds[i])!r},{row}\n")


def load_features(path) -> FeatureMatrix:
    with open(path, "rt", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header[2:]) != FEATURE_NAMES:
            raise FeatureError(f"{path}: feature columns do not match expected layout")
        nodes, thrs, rows = [], [], []
        for line in fh:
            parts = line.strip().split(",")
            nodes.append(int(parts[0]))
            thrs.append(float(parts[1]))
            rows.append([float(x) for x in parts[2:]])
    return FeatureMatrix(
        values=np.array(rows, np.float64).reshape(len(rows), N_FEATURES),
        node_ids=np.array(nodes, np.int64),
        thresholds=np.array(thrs, np.float64),
    )


def save_scaler(scaler: Scaler, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        json.dump(scaler.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scaler(path) -> Scaler:
    with open(path, "rt", encoding="utf-8") as fh:
        return Scaler.from_json(json.load(fh))
