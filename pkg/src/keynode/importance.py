"""Feature attribution by permutation-sampled Shapley values.

For a sample x, features enter a coalition in random order; each
feature's marginal contribution is the change in the model output when
that feature's value flips from a background row's value to x's value.
The model output is the predicted probability of the model's own
predicted class for x, so attributions are bounded and comparable across
model kinds. Averaging |attribution| over a row sample ranks features.
"""

import json
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .features import FeatureMatrix
from .models import TrainedModel, predict_proba
from .rng import derive_seed, numpy_generator

DEFAULT_SAMPLE_SIZE = 500
DEFAULT_PERMUTATIONS = 200
DEFAULT_BACKGROUND = 100


class ImportanceError(Exception):
    pass


@dataclass
class ImportanceReport:
    feature_names: tuple
    mean_abs_shapley: np.ndarray
    samples_used: int
    permutations_per_sample: int
    background_size: int
    per_sample: Optional[np.ndarray] = None

    def ranking(self) -> list:
        order = np.argsort(-self.mean_abs_shapley, kind="stable")
        return [(self.feature_names[i], float(self.mean_abs_shapley[i])) for i in order]

    def rank_of(self, feature_name: str) -> int:
        """1-based position of a feature in the descending ranking."""
        names = [name for name, _ in self.ranking()]
        return names.index(feature_name) + 1

    def to_json(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean_abs_shapley": [float(x) for x in self.mean_abs_shapley],
            "samples_used": self.samples_used,
            "permutations_per_sample": self.permutations_per_sample,
            "background_size": self.background_size,
        }


def shapley_values_fn(
    value_fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    background: np.ndarray,
    permutations: int,
    seed: int,
) -> np.ndarray:
    """Permutation-sampling Shapley attribution for an arbitrary scorer.

    ``value_fn`` maps a batch of rows to scalar scores. Each sampled
    permutation walks from one background row to x, crediting every
    feature with the score change it causes. Per permutation the credits
    telescope to value(x) - value(background row), so the attribution
    total matches the deviation from the sampled background mean exactly.
    """
    if permutations < 1:
        raise ImportanceError("permutations must be >= 1")
    if background.ndim != 2 or background.shape[0] == 0:
        raise ImportanceError("background must be a nonempty 2-D array")
    d = x.shape[0]
    if background.shape[1] != d:
        raise ImportanceError("background width does not match the sample")
    rng = numpy_generator(seed)
    perms = np.stack([rng.permutation(d) for _ in range(permutations)])
    b_rows = background[rng.integers(0, background.shape[0], permutations)]
    # walk rows: position j holds the coalition after j replacements
    batch = np.empty((permutations, d + 1, d))
    batch[:, 0, :] = b_rows
    for j in range(d):
        batch[:, j + 1, :] = batch[:, j, :]
        rows = np.arange(permutations)
        batch[rows, j + 1, perms[:, j]] = x[perms[:, j]]
    values = np.asarray(value_fn(batch.reshape(-1, d))).reshape(permutations, d + 1)
    deltas = np.diff(values, axis=1)
    attr = np.zeros(d)
    np.add.at(attr, perms.ravel(), deltas.ravel())
    return attr / permutations


def _predicted_class_scorer(model: TrainedModel, x: np.ndarray):
    proba = predict_proba(model, x[None, :])
    cls_index = int(np.argmax(proba[0]))

    def score(batch: np.ndarray) -> np.ndarray:
        return predict_proba(model, batch)[:, cls_index]

    return score


def _coerce_rows(model: TrainedModel, X: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        if tuple(X.feature_names) != tuple(model.feature_names):
            raise ImportanceError("feature names do not match the model")
        return np.asarray(X.values, np.float64)
    X = np.asarray(X, np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise ImportanceError("feature width does not match the model")
    return X


def shapley_sample(
    model: TrainedModel,
    x: np.ndarray,
    background: Union[FeatureMatrix, np.ndarray],
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> np.ndarray:
    """Attribution vector for one sample under the trained model."""
    bg = _coerce_rows(model, background)
    x = np.asarray(x, np.float64)
    return shapley_values_fn(
        _predicted_class_scorer(model, x), x, bg, permutations, seed
    )


def importance_report(
    model: TrainedModel,
    X: Union[FeatureMatrix, np.ndarray],
    sample_size: int = DEFAULT_SAMPLE_SIZE,
    permutations: int = DEFAULT_PERMUTATIONS,
    background_size: int = DEFAULT_BACKGROUND,
    seed: int = 0,
    keep_per_sample: bool = False,
) -> ImportanceReport:
    """Mean |Shapley| per feature over a seeded row sample."""
    rows = _coerce_rows(model, X)
    if rows.shape[0] == 0:
        raise ImportanceError("cannot attribute over an empty matrix")
    if sample_size > rows.shape[0]:
        sample_size = rows.shape[0]
    rng = numpy_generator(derive_seed(seed, 0x5A))
    picked = rng.choice(rows.shape[0], sample_size, replace=False)
    bg_size = min(background_size, rows.shape[0])
    background = rows[rng.choice(rows.shape[0], bg_size, replace=False)]
    per_sample = np.empty((sample_size, rows.shape[1]))
    for i, r in enumerate(picked):
        per_sample[i] = shapley_values_fn(
            _predicted_class_scorer(model, rows[r]),
            rows[r],
            background,
            permutations,
            derive_seed(seed, int(r)),
        )
    return ImportanceReport(
        feature_names=tuple(model.feature_names),
        mean_abs_shapley=np.abs(per_sample).mean(axis=0),
        samples_used=sample_size,
        permutations_per_sample=permutations,
        background_size=bg_size,
        per_sample=per_sample if keep_per_sample else None,
    )


def save_report(report: ImportanceReport, json_path, csv_path=None) -> None:
    with open(json_path, "wt", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if csv_path is not None:
        with open(csv_path, "wt", encoding="utf-8") as fh:
            fh.write("feature,mean_abs_shapley\n")
            for name, value in report.ranking():
                fh.write(f"{name},{value!r}\n")
