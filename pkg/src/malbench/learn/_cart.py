"""CART growth for binary classification: exhaustive midpoint splits,
Gini impurity, no depth limit. Hot loops are numba-compiled; tree growth
itself is a plain Python DFS so per-node RNG draws stay on numpy's
Generator stream."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _best_split_kernel(C, y, min_leaf):
    """Best Gini split over candidate columns C (n x k), labels y in {0,1}.

    Returns (found, col, threshold, weighted_gini). Ties are broken toward
    the lowest column index, then the lowest threshold (strict-improvement
    scan in ascending order).
    """
    n, k = C.shape
    total_pos = 0
    for i in range(n):
        total_pos += y[i]

    best_found = False
    best_col = -1
    best_thr = 0.0
    best_score = np.inf

    for j in range(k):
        col = np.empty(n, dtype=np.float64)
        for i in range(n):
            col[i] = C[i, j]
        order = np.argsort(col)
        pos_left = 0
        for rank in range(n - 1):
            i = order[rank]
            pos_left += y[i]
            v = col[i]
            v_next = col[order[rank + 1]]
            if v == v_next:
                continue
            n_left = rank + 1
            n_right = n - n_left
            if n_left < min_leaf or n_right < min_leaf:
                continue
            pos_right = total_pos - pos_left
            pl = pos_left / n_left
            pr = pos_right / n_right
            gini_left = 2.0 * pl * (1.0 - pl)
            gini_right = 2.0 * pr * (1.0 - pr)
            score = (n_left * gini_left + n_right * gini_right) / n
            if score < best_score:
                best_score = score
                best_col = j
                best_thr = 0.5 * (v + v_next)
                best_found = True
    return best_found, best_col, best_thr, best_score


@njit(cache=True)
def tree_apply(X, feature, threshold, left, right, value, strict_less):
    """Leaf value for each row; left child when x <= thr (or x < thr)."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while left[node] >= 0:
            x = X[i, feature[node]]
            if (x < threshold[node]) if strict_less else (x <= threshold[node]):
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


class Tree:
    """Array-encoded binary tree; leaves have left == -1."""

    __slots__ = ("feature", "threshold", "left", "right", "value",
                 "n_samples", "strict_less")

    def __init__(self, feature, threshold, left, right, value, n_samples,
                 strict_less=False):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.value = value
        self.n_samples = n_samples
        self.strict_less = strict_less

    def apply(self, X: np.ndarray) -> np.ndarray:
        return tree_apply(X, self.feature, self.threshold, self.left,
                          self.right, self.value, self.strict_less)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.left < 0))


def grow_cart(X: np.ndarray, y: np.ndarray, rng: np.random.Generator | None,
              max_features: int | None, min_samples_split: int = 2,
              min_samples_leaf: int = 1, max_depth: int | None = None) -> Tree:
    """Grow an unpruned CART; leaf value is the class-1 fraction.

    When max_features is set, that many candidate features are drawn
    per node from rng (without replacement); the node visit order is a
    fixed left-first DFS, so the draw sequence is deterministic.
    """
    n, n_total_features = X.shape
    y8 = np.ascontiguousarray(y, dtype=np.int64)

    feature, threshold = [], []
    left, right = [], []
    value, n_samples = [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        n_samples.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(np.arange(n, dtype=np.int64), root, 0)]
    while stack:
        idx, node, depth = stack.pop()
        ysub = y8[idx]
        pos = int(ysub.sum())
        m = len(idx)
        value[node] = pos / m
        n_samples[node] = m

        if pos == 0 or pos == m or m < min_samples_split:
            continue
        if max_depth is not None and depth >= max_depth:
            continue

        if max_features is not None and max_features < n_total_features:
            feats = np.sort(rng.choice(n_total_features, size=max_features,
                                       replace=False))
        else:
            feats = np.arange(n_total_features, dtype=np.int64)

        C = np.ascontiguousarray(X[idx][:, feats])
        found, col, thr, _ = _best_split_kernel(C, ysub, min_samples_leaf)
        if not found:
            continue

        global_feat = int(feats[col])
        mask = X[idx, global_feat] <= thr
        left_idx = idx[mask]
        right_idx = idx[~mask]

        feature[node] = global_feat
        threshold[node] = thr
        left_node = new_node()
        right_node = new_node()
        left[node] = left_node
        right[node] = right_node
        # Push right first so the left child is processed (and numbered)
        # before the right subtree.
        stack.append((right_idx, right_node, depth + 1))
        stack.append((left_idx, left_node, depth + 1))

    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        n_samples=np.asarray(n_samples, dtype=np.int64),
    )
