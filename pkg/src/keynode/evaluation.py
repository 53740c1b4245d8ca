"""Task construction and classifier evaluation.

Three prediction targets come out of the simulation stage: influence
range, influence peak and peak time. Evaluation keeps all rows of a node
on one side of a split (rows at different thresholds are near-duplicates)
and stratifies node draws by the node's label tuple so that rare top
classes survive an 80/20 split. Scoring is macro F1 over the classes
present in the true labels.
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .centrality import compute_all_centralities
from .diffusion import SimulationRecord, ThresholdSet, simulate_all
from .features import FeatureMatrix, apply_standardizer, assemble_features, fit_standardizer
from .graph import Graph
from .labeling import LabelSet, fixed_bins_top_percent, smart_bins_kmeans
from .models import ModelSpec, predict, train
from .rng import derive_seed, numpy_generator

TEST_FRACTION = 0.2
DEFAULT_TRIALS = 5
MAX_SPLIT_RETRIES = 20


class EvaluationError(Exception):
    pass


class SplitError(EvaluationError):
    pass


class TaskId(Enum):
    influence_range = "mean_range"
    influence_peak = "mean_peak"
    peak_time = "mean_peak_time"


@dataclass
class EvalReport:
    task: str
    k: int
    model: str
    train_network: str
    test_network: str
    trials: int
    f1_macro_mean: float
    f1_macro_std: float
    per_trial_f1: List[float]
    per_class_f1: List[float]
    confusion: List[List[int]]
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "k": self.k,
            "model": self.model,
            "train_network": self.train_network,
            "test_network": self.test_network,
            "trials": self.trials,
            "f1_macro_mean": self.f1_macro_mean,
            "f1_macro_std": self.f1_macro_std,
            "per_trial_f1": self.per_trial_f1,
            "per_class_f1": self.per_class_f1,
            "confusion": self.confusion,
            "meta": self.meta,
        }

    def csv_rows(self) -> List[str]:
        """Flat grid rows: task,k,model,train,test,trial,f1."""
        return [
            f"{self.task},{self.k},{self.model},{self.train_network},"
            f"{self.test_network},{t},{f1!r}"
            for t, f1 in enumerate(self.per_trial_f1)
        ]


def f1_macro(y_true, y_pred) -> float:
    """Unweighted mean of per-class F1 over classes present in y_true."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.size == 0 or y_true.shape != y_pred.shape:
        raise EvaluationError("f1_macro needs equal-length nonempty label vectors")
    scores = []
    for c in np.unique(y_true):
        tp = int(((y_true == c) & (y_pred == c)).sum())
        fp = int(((y_true != c) & (y_pred == c)).sum())
        fn = int(((y_true == c) & (y_pred != c)).sum())
        denom = 2 * tp + fp + fn
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def confusion_matrix(y_true, y_pred, n_classes) -> np.ndarray:
    out = np.zeros((n_classes, n_classes), np.int64)
    np.add.at(out, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return out


# ---------------------------------------------------------------------------
# dataset bundle


@dataclass
class NetworkDataset:
    """Everything evaluation needs about one processed network."""

    name: str
    n_nodes: int
    thresholds: ThresholdSet
    features: FeatureMatrix  # raw (unstandardized)
    sim_values: Dict[TaskId, np.ndarray]  # per feature row

    @classmethod
    def from_records(cls, name, n_nodes: int, thresholds, features, records):
        values = {
            task: np.array([getattr(r, task.value) for r in records], np.float64)
            for task in TaskId
        }
        return cls(name, n_nodes, thresholds, features, values)


def build_dataset(
    g: Graph,
    thresholds: ThresholdSet,
    runs: int,
    master_seed: int,
    name: str = "network",
    cache_dir=None,
    records: Optional[Sequence[SimulationRecord]] = None,
    threads: Optional[int] = None,
    progress=None,
) -> NetworkDataset:
    """Simulate, compute centralities and assemble the raw feature matrix.

    Feature rows and simulation records share the same node-major order.
    """
    if records is None:
        records = simulate_all(
            g, thresholds, runs=runs, master_seed=master_seed,
            threads=threads, progress=progress,
        )
    maps = compute_all_centralities(g, cache_dir=cache_dir)
    features = assemble_features(maps, thresholds)
    if features.n_rows != len(records):
        raise EvaluationError("simulation records out of sync with feature rows")
    return NetworkDataset.from_records(name, g.n, thresholds, features, records)


def task_labels(
    dataset: NetworkDataset,
    task: TaskId,
    k: int,
    seed: int,
    method: str = "smart_kmeans",
    top_fraction: float = 0.05,
    per_threshold: bool = True,
) -> Tuple[np.ndarray, List[LabelSet]]:
    """Row-aligned labels, discretized per threshold group by default."""
    values = dataset.sim_values[task]
    thr = dataset.features.thresholds
    row_labels = np.full(values.shape[0], -1, np.int64)
    label_sets = []
    groups = (
        [(t, thr == t) for t in dataset.thresholds.values]
        if per_threshold
        else [(None, np.ones(values.shape[0], bool))]
    )
    for idx, (t, mask) in enumerate(groups):
        if method == "smart_kmeans":
            ls = smart_bins_kmeans(values[mask], k=k, seed=derive_seed(seed, idx))
        elif method == "fixed_top_percent":
            ls = fixed_bins_top_percent(values[mask], top_fraction)
        else:
            raise EvaluationError(f"unsupported labeling method {method!r}")
        ls.source_task = task.name
        ls.threshold = t
        row_labels[mask] = ls.labels
        label_sets.append(ls)
    return row_labels, label_sets


# ---------------------------------------------------------------------------
# node-level stratified splitting


def _node_strata(node_ids, row_labels, n_nodes) -> np.ndarray:
    """Stratum id per node: its tuple of labels across thresholds."""
    keys = [()] * n_nodes
    order = np.argsort(node_ids, kind="stable")
    for i in order:
        keys[node_ids[i]] = keys[node_ids[i]] + (int(row_labels[i]),)
    uniq = {}
    strata = np.empty(n_nodes, np.int64)
    for v, key in enumerate(keys):
        strata[v] = uniq.setdefault(key, len(uniq))
    return strata


def stratified_node_split(strata, test_fraction, rng):
    """Per-stratum shuffled split; singleton strata go to the train side."""
    train, test = [], []
    for s in np.unique(strata):
        members = np.flatnonzero(strata == s)
        members = members[rng.permutation(members.size)]
        if members.size == 1:
            train.extend(members)
            continue
        n_test = int(round(test_fraction * members.size))
        n_test = min(max(n_test, 1), members.size - 1)
        test.extend(members[:n_test])
        train.extend(members[n_test:])
    return np.sort(np.array(train, np.int64)), np.sort(np.array(test, np.int64))


def split_rows(
    dataset: NetworkDataset,
    row_labels: np.ndarray,
    trial_seed: int,
    strata_labels: Optional[np.ndarray] = None,
):
    """Stratified 80/20 node split; retries until every class lands on
    both sides, erroring out after MAX_SPLIT_RETRIES attempts."""
    node_ids = dataset.features.node_ids
    strata = _node_strata(
        node_ids,
        strata_labels if strata_labels is not None else row_labels,
        dataset.n_nodes,
    )
    classes = np.unique(row_labels)
    for attempt in range(MAX_SPLIT_RETRIES):
        rng = numpy_generator(derive_seed(trial_seed, attempt))
        train_nodes, test_nodes = stratified_node_split(strata, TEST_FRACTION, rng)
        on_train = np.isin(node_ids, train_nodes)
        on_test = np.isin(node_ids, test_nodes)
        ok_train = np.isin(classes, row_labels[on_train]).all()
        ok_test = np.isin(classes, row_labels[on_test]).all()
        if ok_train and ok_test:
            return np.flatnonzero(on_train), np.flatnonzero(on_test)
    raise SplitError(
        f"could not produce a split covering all classes in {MAX_SPLIT_RETRIES} tries"
    )


# ---------------------------------------------------------------------------
# evaluation harnesses


def _fit_score(dataset, row_labels, train_rows, test_rows, spec):
    """Standardize on the train side, train, and score the test side."""
    train_m = dataset.features.take(train_rows)
    test_m = dataset.features.take(test_rows)
    scaler = fit_standardizer(train_m)
    train_m = apply_standardizer(train_m, scaler)
    test_m = apply_standardizer(test_m, scaler)
    model = train(spec, train_m, row_labels[train_rows])
    y_pred = predict(model, test_m)
    y_true = row_labels[test_rows]
    return f1_macro(y_true, y_pred), y_true, y_pred


def _run_trials(dataset, row_labels, spec, trials, master_seed, strata_labels=None):
    n_classes = int(row_labels.max()) + 1
    scores = []
    confusion = np.zeros((n_classes, n_classes), np.int64)
    for t in range(trials):
        train_rows, test_rows = split_rows(
            dataset, row_labels, derive_seed(master_seed, t), strata_labels
        )
        f1, y_true, y_pred = _fit_score(
            dataset, row_labels, train_rows, test_rows, spec
        )
        scores.append(f1)
        confusion += confusion_matrix(y_true, y_pred, n_classes)
    per_class = []
    for c in range(n_classes):
        tp = confusion[c, c]
        denom = 2 * tp + (confusion[:, c].sum() - tp) + (confusion[c].sum() - tp)
        per_class.append(float(2.0 * tp / denom) if denom else 0.0)
    return scores, per_class, confusion


def within_network_eval(
    dataset: NetworkDataset,
    task: TaskId,
    k: int,
    spec: ModelSpec,
    trials: int = DEFAULT_TRIALS,
    master_seed: int = 0,
    label_method: str = "smart_kmeans",
) -> EvalReport:
    """Hold-out evaluation: stratified 80/20 node split per trial."""
    row_labels, _ = task_labels(
        dataset, task, k, seed=derive_seed(master_seed, 0xAB), method=label_method
    )
    scores, per_class, confusion = _run_trials(
        dataset, row_labels, spec, trials, master_seed
    )
    return EvalReport(
        task=task.name,
        k=k,
        model=spec.kind,
        train_network=dataset.name,
        test_network=dataset.name,
        trials=trials,
        f1_macro_mean=float(np.mean(scores)),
        f1_macro_std=float(np.std(scores)),
        per_trial_f1=[float(s) for s in scores],
        per_class_f1=per_class,
        confusion=confusion.tolist(),
        meta={"label_method": label_method, "master_seed": master_seed},
    )


def cross_network_eval(
    ds_train: NetworkDataset,
    ds_test: NetworkDataset,
    task: TaskId,
    k: int,
    spec: ModelSpec,
    master_seed: int = 0,
) -> EvalReport:
    """Train on every sample of one network, score on every sample of
    another; labels and scalers are computed per network independently."""
    y_train, _ = task_labels(ds_train, task, k, seed=derive_seed(master_seed, 1))
    y_test, _ = task_labels(ds_test, task, k, seed=derive_seed(master_seed, 2))
    train_m = apply_standardizer(ds_train.features, fit_standardizer(ds_train.features))
    test_m = apply_standardizer(ds_test.features, fit_standardizer(ds_test.features))
    model = train(spec, train_m, y_train)
    y_pred = predict(model, test_m)
    score = f1_macro(y_test, y_pred)
    n_classes = int(max(y_test.max(), y_pred.max())) + 1
    return EvalReport(
        task=task.name,
        k=k,
        model=spec.kind,
        train_network=ds_train.name,
        test_network=ds_test.name,
        trials=1,
        f1_macro_mean=float(score),
        f1_macro_std=0.0,
        per_trial_f1=[float(score)],
        per_class_f1=[],
        confusion=confusion_matrix(y_test, y_pred, n_classes).tolist(),
        meta={"master_seed": master_seed},
    )


def binning_comparison(
    dataset: NetworkDataset,
    task: TaskId,
    spec: ModelSpec,
    trials: int = DEFAULT_TRIALS,
    master_seed: int = 0,
    top_fraction: float = 0.05,
) -> Tuple[EvalReport, EvalReport]:
    """Smart two-bin labels vs fixed top-percent labels on identical
    node splits (stratified by the joint label pattern)."""
    smart, _ = task_labels(
        dataset, task, 2, seed=derive_seed(master_seed, 3), method="smart_kmeans"
    )
    fixed, _ = task_labels(
        dataset, task, 2, seed=derive_seed(master_seed, 4),
        method="fixed_top_percent", top_fraction=top_fraction,
    )
    joint = smart * 2 + fixed
    reports = []
    for name, labels in (("smart_kmeans", smart), ("fixed_top_percent", fixed)):
        scores, per_class, confusion = _run_trials(
            dataset, labels, spec, trials, master_seed, strata_labels=joint
        )
        reports.append(
            EvalReport(
                task=task.name,
                k=2,
                model=spec.kind,
                train_network=dataset.name,
                test_network=dataset.name,
                trials=trials,
                f1_macro_mean=float(np.mean(scores)),
                f1_macro_std=float(np.std(scores)),
                per_trial_f1=[float(s) for s in scores],
                per_class_f1=per_class,
                confusion=confusion.tolist(),
                meta={"label_method": name, "top_fraction": top_fraction},
            )
        )
    return reports[0], reports[1]


# ---------------------------------------------------------------------------
# persistence


def save_report(report: EvalReport, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> EvalReport:
    with open(path, "rt", encoding="utf-8") as fh:
        return EvalReport(**json.load(fh))


REPORT_CSV_HEADER = "task,k,model,train,test,trial,f1"


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    lines = [REPORT_CSV_HEADER]
    for r in reports:
        lines.extend(r.csv_rows())
    return "\n".join(lines) + "\n"
