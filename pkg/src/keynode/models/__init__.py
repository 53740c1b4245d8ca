"""Classifier suite: logistic regression, k-NN, random forest and
gradient-boosted trees behind one train/predict interface.

All tie-breaking goes toward the lower class index. Training is
deterministic for a fixed (spec, data, seed) triple, and models
serialise to versioned JSON.
"""

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from ..features import FeatureMatrix
from ..labeling import LabelSet
from . import _forest, _gbm, _knn, _logreg
from ._tree import tree_from_lists, tree_to_lists

MODEL_FORMAT = "keynode-model-v1"

MODEL_KINDS = ("logreg", "knn", "random_forest", "gbm")

DEFAULT_HYPERPARAMS = {
    "logreg": {"l2": 1e-4, "max_iter": 500, "tol": 1e-6},
    "knn": {"k": 5},
    "random_forest": {
        "n_trees": 100,
        "max_depth": None,
        "feature_subsample": "sqrt",
        "bootstrap": True,
    },
    "gbm": {"n_rounds": 100, "learning_rate": 0.1, "max_leaves": 31},
}


class ModelError(Exception):
    pass


class TrainingError(ModelError):
    pass


class ValidationError(ModelError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparams: Optional[dict] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}")
        unknown = set(self.hyperparams or ()) - set(DEFAULT_HYPERPARAMS[self.kind])
        if unknown:
            raise ModelError(f"unknown hyperparams for {self.kind}: {sorted(unknown)}")

    def resolved(self) -> dict:
        merged = dict(DEFAULT_HYPERPARAMS[self.kind])
        merged.update(self.hyperparams or {})
        return merged


@dataclass
class TrainedModel:
    spec: ModelSpec
    classes: np.ndarray
    feature_names: tuple
    params: dict
    meta: dict = field(default_factory=dict)


def _coerce_X(X: Union[FeatureMatrix, np.ndarray]):
    if isinstance(X, FeatureMatrix):
        return np.asarray(X.values, np.float64), tuple(X.feature_names)
    X = np.asarray(X, np.float64)
    if X.ndim != 2:
        raise ValidationError("feature input must be 2-D")
    return X, tuple(f"f{i}" for i in range(X.shape[1]))


def _coerce_y(y: Union[LabelSet, Sequence[int]]):
    if isinstance(y, LabelSet):
        return np.asarray(y.labels, np.int64)
    return np.asarray(y, np.int64)


def train(spec: ModelSpec, X, y) -> TrainedModel:
    Xv, names = _coerce_X(X)
    yv = _coerce_y(y)
    if Xv.shape[0] != yv.shape[0]:
        raise ValidationError(
            f"{Xv.shape[0]} feature rows vs {yv.shape[0]} labels"
        )
    if Xv.shape[0] == 0:
        raise ValidationError("empty training set")
    if not np.isfinite(Xv).all():
        raise ValidationError("features contain NaN or infinite values")
    classes = np.unique(yv)
    if classes.size < 2:
        raise TrainingError("training labels contain a single class")
    y_idx = np.searchsorted(classes, yv)
    hp = spec.resolved()
    if spec.kind == "logreg":
        params = _logreg.fit(Xv, y_idx, classes.size, **hp)
        meta = {
            "converged": params.pop("converged"),
            "iterations": params.pop("iterations"),
            "grad_norm": params.pop("grad_norm"),
        }
    elif spec.kind == "knn":
        params = _knn.fit(Xv, y_idx, **hp)
        meta = {}
    elif spec.kind == "random_forest":
        params = _forest.fit(Xv, y_idx, classes.size, seed=spec.seed, **hp)
        meta = {}
    else:
        params = _gbm.fit(Xv, y_idx, classes.size, **hp)
        meta = {"train_log_loss": params["train_log_loss"]}
    return TrainedModel(
        spec=spec, classes=classes, feature_names=names, params=params, meta=meta
    )


def _check_columns(model: TrainedModel, X):
    """Named inputs must match the training columns exactly; bare arrays
    only need the right width."""
    if isinstance(X, FeatureMatrix):
        if tuple(X.feature_names) != model.feature_names:
            raise ValidationError(
                "feature columns do not match the training layout: "
                f"{tuple(X.feature_names)} vs {model.feature_names}"
            )
        Xv = np.asarray(X.values, np.float64)
    else:
        Xv = np.asarray(X, np.float64)
        if Xv.ndim != 2 or Xv.shape[1] != len(model.feature_names):
            raise ValidationError(
                f"expected {len(model.feature_names)} feature columns, "
                f"got shape {Xv.shape}"
            )
    if not np.isfinite(Xv).all():
        raise ValidationError("features contain NaN or infinite values")
    return Xv


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    Xv = _check_columns(model, X)
    kind = model.spec.kind
    if kind == "logreg":
        return _logreg.predict_proba(model.params, Xv)
    if kind == "knn":
        return _knn.vote_fractions(model.params, Xv, model.classes.size)
    if kind == "random_forest":
        return _forest.vote_fractions(model.params, Xv)
    return _gbm.predict_proba(model.params, Xv)


def predict(model: TrainedModel, X) -> np.ndarray:
    proba = predict_proba(model, X)
    return model.classes[np.argmax(proba, axis=1)]


def staged_log_loss(model: TrainedModel) -> Sequence[float]:
    """Training log-loss before each boosting round plus the final value."""
    if model.spec.kind != "gbm":
        raise ModelError("staged loss is only defined for gbm models")
    return list(model.params["train_log_loss"])


# ---------------------------------------------------------------------------
# serialization


def model_to_json(model: TrainedModel) -> dict:
    kind = model.spec.kind
    if kind == "logreg":
        params = {
            "weights": model.params["weights"].tolist(),
            "bias": model.params["bias"].tolist(),
        }
    elif kind == "knn":
        params = {
            "train_X": model.params["train_X"].tolist(),
            "train_y": model.params["train_y"].tolist(),
            "k": model.params["k"],
        }
    elif kind == "random_forest":
        params = {
            "n_classes": model.params["n_classes"],
            "trees": [tree_to_lists(t) for t in model.params["trees"]],
        }
    else:
        params = {
            "n_classes": model.params["n_classes"],
            "learning_rate": model.params["learning_rate"],
            "factor": model.params["factor"],
            "train_log_loss": model.params["train_log_loss"],
            "rounds": [[tree_to_lists(t) for t in rt] for rt in model.params["trees"]],
        }
    return {
        "format": MODEL_FORMAT,
        "kind": kind,
        "hyperparams": _jsonable(model.spec.resolved()),
        "seed": model.spec.seed,
        "classes": model.classes.tolist(),
        "feature_names": list(model.feature_names),
        "meta": _jsonable(model.meta),
        "params": params,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def model_from_json(data: dict) -> TrainedModel:
    if data.get("format") != MODEL_FORMAT:
        raise ModelError(f"unsupported model format {data.get('format')!r}")
    kind = data["kind"]
    spec = ModelSpec(kind, data["hyperparams"], data["seed"])
    raw = data["params"]
    if kind == "logreg":
        params = {
            "weights": np.array(raw["weights"], np.float64),
            "bias": np.array(raw["bias"], np.float64),
        }
    elif kind == "knn":
        params = {
            "train_X": np.array(raw["train_X"], np.float64),
            "train_y": np.array(raw["train_y"], np.int64),
            "k": int(raw["k"]),
        }
    elif kind == "random_forest":
        params = {
            "n_classes": int(raw["n_classes"]),
            "trees": [tree_from_lists(t) for t in raw["trees"]],
        }
    else:
        params = {
            "n_classes": int(raw["n_classes"]),
            "learning_rate": float(raw["learning_rate"]),
            "factor": float(raw["factor"]),
            "train_log_loss": list(raw["train_log_loss"]),
            "trees": [[tree_from_lists(t) for t in rt] for rt in raw["rounds"]],
        }
    return TrainedModel(
        spec=spec,
        classes=np.array(data["classes"], np.int64),
        feature_names=tuple(data["feature_names"]),
        params=params,
        meta=data.get("meta", {}),
    )


def save_model(model: TrainedModel, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        json.dump(model_to_json(model), fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TrainedModel:
    with open(path, "rt", encoding="utf-8") as fh:
        return model_from_json(json.load(fh))
