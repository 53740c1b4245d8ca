"""Random forest: bagged gini trees with per-split feature subsampling.

Probabilities are hard-vote fractions across trees. With one tree,
bootstrap off and no subsampling, the forest reduces to the plain tree.
"""

import numpy as np

from ..rng import derive_seed, numpy_generator
from ._tree import ClassificationTree


def fit(X, y, n_classes, n_trees=100, max_depth=None, feature_subsample="sqrt",
        bootstrap=True, seed=0):
    n, d = X.shape
    if feature_subsample == "sqrt":
        subsample = max(1, int(round(np.sqrt(d))))
    else:
        subsample = feature_subsample  # None or explicit count
    trees = []
    for t in range(n_trees):
        rng = numpy_generator(derive_seed(seed, t))
        rows = rng.integers(0, n, n) if bootstrap else np.arange(n)
        tree = ClassificationTree(
            max_depth=max_depth, feature_subsample=subsample, rng=rng
        )
        tree.fit(X[rows], y[rows], n_classes)
        trees.append(tree)
    return {"trees": trees, "n_classes": n_classes}


def vote_fractions(params, X):
    n_classes = params["n_classes"]
    votes = np.zeros((X.shape[0], n_classes))
    for tree in params["trees"]:
        pred = tree.predict(X)
        votes[np.arange(X.shape[0]), pred] += 1.0
    return votes / len(params["trees"])
