"""Decision trees: exact greedy split finding over sorted feature values.

Two learners share the split machinery: a gini classification tree
(depth-first growth, used by the random forest) and a squared-error
regression tree grown best-first up to a leaf cap (used by the boosted
ensemble). Split scans are numba kernels with numpy-cumsum fallbacks;
sorts are stable so both backends pick identical splits.

Trees serialise to flat parallel arrays: feature (-1 marks a leaf),
threshold, left, right, and per-node values.
"""

import heapq

import numpy as np

from ..backend import HAVE_NUMBA, USE_NUMBA

_EPS = 1e-12

if HAVE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _scan_gini_njit(sorted_vals, sorted_classes, n_classes):
        """Best split of one sorted feature column by gini impurity drop.

        Returns (gain, threshold); gain < 0 when no valid split exists.
        Gain is the unnormalised impurity improvement
        n*gini(parent) - nL*gini(L) - nR*gini(R), computed from exact
        integer class counts.
        """
        m = sorted_vals.shape[0]
        total = np.zeros(n_classes, np.int64)
        for i in range(m):
            total[sorted_classes[i]] += 1
        sq_total = 0.0
        for c in range(n_classes):
            sq_total += total[c] * total[c]
        parent = m - sq_total / m
        left = np.zeros(n_classes, np.int64)
        best_gain = -1.0
        best_thr = 0.0
        sq_left = 0.0
        for i in range(m - 1):
            c = sorted_classes[i]
            sq_left += 2.0 * left[c] + 1.0
            left[c] += 1
            if sorted_vals[i] == sorted_vals[i + 1]:
                continue
            nl = i + 1
            nr = m - nl
            sq_right = 0.0
            for k in range(n_classes):
                r = total[k] - left[k]
                sq_right += r * r
            child = nl - sq_left / nl + nr - sq_right / nr
            gain = parent - child
            if gain > best_gain:
                best_gain = gain
                best_thr = 0.5 * (sorted_vals[i] + sorted_vals[i + 1])
        return best_gain, best_thr

    @njit(cache=True)
    def _scan_sse_njit(sorted_vals, sorted_targets):
        """Best split of one sorted column by squared-error reduction."""
        m = sorted_vals.shape[0]
        total = 0.0
        for i in range(m):
            total += sorted_targets[i]
        best_gain = -1.0
        best_thr = 0.0
        base = total * total / m
        acc = 0.0
        for i in range(m - 1):
            acc += sorted_targets[i]
            if sorted_vals[i] == sorted_vals[i + 1]:
                continue
            nl = i + 1
            nr = m - nl
            rest = total - acc
            gain = acc * acc / nl + rest * rest / nr - base
            if gain > best_gain:
                best_gain = gain
                best_thr = 0.5 * (sorted_vals[i] + sorted_vals[i + 1])
        return best_gain, best_thr


def _scan_gini_numpy(sorted_vals, sorted_classes, n_classes):
    m = sorted_vals.shape[0]
    onehot = np.zeros((m, n_classes), np.int64)
    onehot[np.arange(m), sorted_classes] = 1
    left = np.cumsum(onehot, axis=0)[:-1]
    total = onehot.sum(axis=0)
    nl = np.arange(1, m, dtype=np.float64)
    nr = m - nl
    sq_left = (left.astype(np.float64) ** 2).sum(axis=1)
    sq_right = ((total - left).astype(np.float64) ** 2).sum(axis=1)
    parent = m - float((total.astype(np.float64) ** 2).sum()) / m
    child = nl - sq_left / nl + nr - sq_right / nr
    gain = parent - child
    valid = sorted_vals[:-1] != sorted_vals[1:]
    if not valid.any():
        return -1.0, 0.0
    gain = np.where(valid, gain, -np.inf)
    best = int(np.argmax(gain))
    return float(gain[best]), float(0.5 * (sorted_vals[best] + sorted_vals[best + 1]))


def _scan_sse_numpy(sorted_vals, sorted_targets):
    m = sorted_vals.shape[0]
    acc = np.cumsum(sorted_targets)[:-1]
    total = float(sorted_targets.sum())
    nl = np.arange(1, m, dtype=np.float64)
    nr = m - nl
    gain = acc**2 / nl + (total - acc) ** 2 / nr - total * total / m
    valid = sorted_vals[:-1] != sorted_vals[1:]
    if not valid.any():
        return -1.0, 0.0
    gain = np.where(valid, gain, -np.inf)
    best = int(np.argmax(gain))
    return float(gain[best]), float(0.5 * (sorted_vals[best] + sorted_vals[best + 1]))


def _best_split(X, rows, feat_ids, score_one):
    """Scan candidate features; ties go to the lower feature id."""
    best = (-1.0, -1, 0.0)  # gain, feature, threshold
    for f in feat_ids:
        col = X[rows, f]
        order = np.argsort(col, kind="stable")
        gain, thr = score_one(col[order], order)
        if gain > best[0] + _EPS:
            best = (gain, int(f), thr)
    return best


class ClassificationTree:
    """Gini decision tree; optional per-split feature subsampling."""

    def __init__(self, max_depth=None, min_samples_split=2, feature_subsample=None, rng=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.feature_subsample = feature_subsample
        self.rng = rng
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.counts = None
        self.n_classes = 0

    def fit(self, X, y, n_classes):
        self.n_classes = n_classes
        feature, threshold, left, right, counts = [], [], [], [], []

        def scan(sorted_vals, order_local, rows):
            classes_sorted = y[rows][order_local]
            if USE_NUMBA:
                return _scan_gini_njit(sorted_vals, classes_sorted, n_classes)
            return _scan_gini_numpy(sorted_vals, classes_sorted, n_classes)

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(None)
            return len(feature) - 1

        stack = [(new_node(), np.arange(X.shape[0]), 0)]
        while stack:
            node, rows, depth = stack.pop()
            dist = np.bincount(y[rows], minlength=n_classes)
            counts[node] = dist
            if (
                rows.size < self.min_samples_split
                or (self.max_depth is not None and depth >= self.max_depth)
                or (dist > 0).sum() < 2
            ):
                continue
            feat_ids = np.arange(X.shape[1])
            if self.feature_subsample is not None and self.feature_subsample < X.shape[1]:
                feat_ids = np.sort(
                    self.rng.choice(X.shape[1], self.feature_subsample, replace=False)
                )
            gain, f, thr = _best_split(
                X, rows, feat_ids, lambda sv, od: scan(sv, od, rows)
            )
            if gain <= _EPS or f < 0:
                continue
            go_left = X[rows, f] <= thr
            feature[node] = f
            threshold[node] = thr
            lid, rid = new_node(), new_node()
            left[node], right[node] = lid, rid
            # right pushed first so the left child is processed next (preorder)
            stack.append((rid, rows[~go_left], depth + 1))
            stack.append((lid, rows[go_left], depth + 1))
        self.feature = np.array(feature, np.int32)
        self.threshold = np.array(threshold, np.float64)
        self.left = np.array(left, np.int32)
        self.right = np.array(right, np.int32)
        self.counts = np.array([c for c in counts], np.int64)
        return self

    def apply(self, X):
        return _walk(self.feature, self.threshold, self.left, self.right, X)

    def predict(self, X):
        leaf = self.apply(X)
        return np.argmax(self.counts[leaf], axis=1)

    def predict_proba(self, X):
        dist = self.counts[self.apply(X)].astype(np.float64)
        return dist / dist.sum(axis=1, keepdims=True)


class RegressionTree:
    """Squared-error tree grown best-first up to ``max_leaves`` leaves.

    Leaf values are sum(numerator)/sum(denominator) over leaf members,
    letting the boosting layer encode its own leaf-weight rule.
    """

    def __init__(self, max_leaves=31, min_samples_split=2):
        self.max_leaves = max_leaves
        self.min_samples_split = min_samples_split
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.value = None

    def fit(self, X, target, leaf_num, leaf_den):
        def scan(col_sorted, tgt_sorted):
            if USE_NUMBA:
                return _scan_sse_njit(col_sorted, tgt_sorted)
            return _scan_sse_numpy(col_sorted, tgt_sorted)

        def node_split(rows):
            best = (-1.0, -1, 0.0)
            if rows.size >= self.min_samples_split:
                tgt = target[rows]
                for f in range(X.shape[1]):
                    col = X[rows, f]
                    order = np.argsort(col, kind="stable")
                    gain, thr = scan(col[order], tgt[order])
                    if gain > best[0] + _EPS:
                        best = (gain, f, thr)
            return best

        def leaf_value(rows):
            den = leaf_den[rows].sum()
            if abs(den) < _EPS:
                return 0.0
            return float(leaf_num[rows].sum() / den)

        feature = [-1]
        threshold = [0.0]
        left = [-1]
        right = [-1]
        value = [0.0]
        rows0 = np.arange(X.shape[0])
        heap = []
        counter = 0
        gain, f, thr = node_split(rows0)
        if gain > _EPS:
            heapq.heappush(heap, (-gain, counter, 0, rows0, f, thr))
            counter += 1
        leaves = {0: rows0}
        while heap and len(leaves) < self.max_leaves:
            _, _, node, rows, f, thr = heapq.heappop(heap)
            go_left = X[rows, f] <= thr
            feature[node] = f
            threshold[node] = thr
            for side_rows in (rows[go_left], rows[~go_left]):
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(0.0)
                child = len(feature) - 1
                if left[node] == -1:
                    left[node] = child
                else:
                    right[node] = child
                leaves[child] = side_rows
                g2, f2, t2 = node_split(side_rows)
                if g2 > _EPS:
                    heapq.heappush(heap, (-g2, counter, child, side_rows, f2, t2))
                    counter += 1
            del leaves[node]
        for node, rows in leaves.items():
            value[node] = leaf_value(rows)
        self.feature = np.array(feature, np.int32)
        self.threshold = np.array(threshold, np.float64)
        self.left = np.array(left, np.int32)
        self.right = np.array(right, np.int32)
        self.value = np.array(value, np.float64)
        return self

    def predict(self, X):
        return self.value[_walk(self.feature, self.threshold, self.left, self.right, X)]


def _walk(feature, threshold, left, right, X):
    """Vectorised root-to-leaf descent; returns leaf index per row."""
    idx = np.zeros(X.shape[0], np.int64)
    while True:
        f = feature[idx]
        active = f >= 0
        if not active.any():
            return idx
        rows = np.flatnonzero(active)
        fa = f[rows]
        go_left = X[rows, fa] <= threshold[idx[rows]]
        idx[rows] = np.where(go_left, left[idx[rows]], right[idx[rows]])


def tree_to_lists(tree) -> dict:
    out = {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
    }
    if isinstance(tree, ClassificationTree):
        out["counts"] = tree.counts.tolist()
    else:
        out["value"] = tree.value.tolist()
    return out


def tree_from_lists(data: dict):
    if "counts" in data:
        tree = ClassificationTree()
        tree.counts = np.array(data["counts"], np.int64)
        tree.n_classes = tree.counts.shape[1]
    else:
        tree = RegressionTree()
        tree.value = np.array(data["value"], np.float64)
    tree.feature = np.array(data["feature"], np.int32)
    tree.threshold = np.array(data["threshold"], np.float64)
    tree.left = np.array(data["left"], np.int32)
    tree.right = np.array(data["right"], np.int32)
    return tree
