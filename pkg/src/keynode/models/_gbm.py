"""Gradient-boosted trees, softmax multiclass, one tree per class per round.

Leaf weights follow the multiclass TreeBoost rule
(K-1)/K * sum(residual) / sum(|residual| * (1 - |residual|)); scores
start at zero and accumulate learning_rate * leaf weight. Exact greedy
splits, leaf-wise growth capped by max_leaves.
"""

import numpy as np

from ._logreg import softmax
from ._tree import RegressionTree


def fit(X, y, n_classes, n_rounds=100, learning_rate=0.1, max_leaves=31):
    n = X.shape[0]
    y_onehot = np.zeros((n, n_classes))
    y_onehot[np.arange(n), y] = 1.0
    scores = np.zeros((n, n_classes))
    factor = 1.0 if n_classes < 2 else (n_classes - 1.0) / n_classes
    trees = []
    train_log_loss = []
    for _ in range(n_rounds):
        probs = softmax(scores)
        train_log_loss.append(_log_loss(probs, y))
        round_trees = []
        for c in range(n_classes):
            residual = y_onehot[:, c] - probs[:, c]
            hessian = np.abs(residual) * (1.0 - np.abs(residual))
            tree = RegressionTree(max_leaves=max_leaves)
            tree.fit(X, residual, leaf_num=residual, leaf_den=hessian)
            scores[:, c] += learning_rate * factor * tree.predict(X)
            round_trees.append(tree)
        trees.append(round_trees)
    train_log_loss.append(_log_loss(softmax(scores), y))
    return {
        "trees": trees,
        "n_classes": n_classes,
        "learning_rate": learning_rate,
        "factor": factor,
        "train_log_loss": train_log_loss,
    }


def _log_loss(probs, y):
    eps = 1e-300
    return float(-np.mean(np.log(probs[np.arange(y.shape[0]), y] + eps)))


def raw_scores(params, X, n_rounds=None):
    trees = params["trees"]
    if n_rounds is not None:
        trees = trees[:n_rounds]
    scores = np.zeros((X.shape[0], params["n_classes"]))
    lr = params["learning_rate"] * params["factor"]
    for round_trees in trees:
        for c, tree in enumerate(round_trees):
            scores[:, c] += lr * tree.predict(X)
    return scores


def predict_proba(params, X, n_rounds=None):
    return softmax(raw_scores(params, X, n_rounds))
