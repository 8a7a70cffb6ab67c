"""The four detector families: DT, RF, LGBM (leaf-wise gradient-boosted
trees) and linear SVM with standardization.

All trainers are deterministic given (X, y, seed, hyperparameters). Tree
models score with class-1 probabilities; the SVM yields hard labels only
and raises Unsupported from score(), signalling the evaluation layer to
fall back to the hard-label operating point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import (
    DegenerateLabels,
    NonFiniteFeature,
    Unsupported,
    WidthMismatch,
)
from ._cart import Tree, grow_cart, tree_apply
from ._hist import best_histogram_split, bin_matrix, build_histograms, make_bins

ALGORITHM_TAGS = ("DT", "RF", "LGBM", "SVM")

DEFAULT_HYPERPARAMS = {
    "DT": {"max_depth": None, "min_samples_split": 2, "min_samples_leaf": 1},
    "RF": {"n_estimators": 100, "max_features": "sqrt",
           "min_samples_split": 2, "min_samples_leaf": 1, "max_depth": None},
    "LGBM": {"n_estimators": 100, "learning_rate": 0.1, "num_leaves": 31,
             "max_bins": 255, "min_child_samples": 20,
             "min_sum_hessian": 1e-3},
    "SVM": {"C": 1.0, "max_iter": 1000, "tol": 1e-4},
}


def resolve_hyperparams(algorithm: str, overrides: dict | None = None) -> dict:
    if algorithm not in DEFAULT_HYPERPARAMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    params = dict(DEFAULT_HYPERPARAMS[algorithm])
    for key, val in (overrides or {}).items():
        if key not in params:
            raise ValueError(f"unknown {algorithm} hyperparameter {key!r}")
        params[key] = val
    return params


def _validate_training_input(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DegenerateLabels("training matrix is empty")
    if len(y) != X.shape[0]:
        raise DegenerateLabels("X and y row counts differ")
    if not np.isfinite(X).all():
        raise NonFiniteFeature("training matrix contains NaN or infinity")
    classes = np.unique(y)
    if not np.array_equal(classes, np.array([0, 1])):
        if len(classes) < 2:
            raise DegenerateLabels(f"labels contain a single class: {classes}")
        raise DegenerateLabels(f"labels must be binary 0/1, got {classes}")
    return X, y


@dataclass
class TrainedModel:
    """Common surface of a fitted detector."""

    algorithm: str
    hyperparams: dict
    seed: int
    n_features: int
    converged: bool = True

    def _check_width(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            width = X.shape[1] if X.ndim == 2 else None
            raise WidthMismatch(
                f"expected {self.n_features} feature columns, got {width}")
        return X

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def score(self, X) -> np.ndarray:
        raise NotImplementedError


@dataclass
class DecisionTreeModel(TrainedModel):
    tree: Tree = None

    def score(self, X):
        """Class-1 fraction of the reached leaf."""
        return self.tree.apply(self._check_width(X))

    def predict(self, X):
        return (self.score(X) > 0.5).astype(np.int64)


@dataclass
class RandomForestModel(TrainedModel):
    trees: list = field(default_factory=list)

    def score(self, X):
        """Mean of per-tree leaf fractions."""
        X = self._check_width(X)
        acc = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            acc += tree.apply(X)
        return acc / len(self.trees)

    def predict(self, X):
        return (self.score(X) > 0.5).astype(np.int64)


@dataclass
class GradientBoostingModel(TrainedModel):
    trees: list = field(default_factory=list)
    base_margin: float = 0.0

    def raw_margin(self, X):
        X = self._check_width(X)
        f = np.full(X.shape[0], self.base_margin, dtype=np.float64)
        for tree in self.trees:
            f += tree.apply(X)
        return f

    def score(self, X):
        """Logistic of the summed leaf values."""
        return 1.0 / (1.0 + np.exp(-np.clip(self.raw_margin(X), -60.0, 60.0)))

    def predict(self, X):
        return (self.raw_margin(X) > 0.0).astype(np.int64)


@dataclass
class LinearSvmModel(TrainedModel):
    weights: np.ndarray = None
    intercept: float = 0.0
    mean: np.ndarray = None
    scale: np.ndarray = None
    n_iter: int = 0

    def decision_function(self, X):
        X = self._check_width(X)
        Xs = (X - self.mean) / self.scale
        return Xs @ self.weights + self.intercept

    def predict(self, X):
        return (self.decision_function(X) > 0.0).astype(np.int64)

    def score(self, X):
        raise Unsupported(
            "linear SVM yields hard labels only; use the hard-label "
            "operating point")


def _train_dt(X, y, seed, params):
    tree = grow_cart(X, y, rng=None, max_features=None,
                     min_samples_split=params["min_samples_split"],
                     min_samples_leaf=params["min_samples_leaf"],
                     max_depth=params["max_depth"])
    return DecisionTreeModel(algorithm="DT", hyperparams=params, seed=seed,
                             n_features=X.shape[1], tree=tree)


def _train_rf(X, y, seed, params):
    n, width = X.shape
    if params["max_features"] == "sqrt":
        max_features = max(1, int(np.sqrt(width)))
    else:
        max_features = int(params["max_features"])
    trees = []
    for ss in np.random.SeedSequence(seed).spawn(params["n_estimators"]):
        rng = np.random.default_rng(ss)
        bootstrap = rng.integers(0, n, size=n)
        trees.append(grow_cart(
            X[bootstrap], y[bootstrap], rng=rng, max_features=max_features,
            min_samples_split=params["min_samples_split"],
            min_samples_leaf=params["min_samples_leaf"],
            max_depth=params["max_depth"]))
    return RandomForestModel(algorithm="RF", hyperparams=params, seed=seed,
                             n_features=width, trees=trees)


class _LeafwiseBooster:
    """Grows one leaf-wise tree per boosting round on binned features."""

    def __init__(self, Xb, n_bins, edges, params):
        self.Xb = Xb
        self.n_bins = n_bins
        self.edges = edges
        self.params = params
        self.offsets = np.zeros(len(n_bins), dtype=np.int64)
        np.cumsum(n_bins[:-1], out=self.offsets[1:])
        self.total_bins = int(n_bins.sum())

    def grow_tree(self, grad, hess):
        self._grad, self._hess = grad, hess
        p = self.params
        min_child = p["min_child_samples"]
        min_hess = p["min_sum_hessian"]
        lr = p["learning_rate"]

        feature, threshold = [], []
        left, right, value = [], [], []

        def new_node():
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(feature) - 1

        def leaf_value(idx):
            g = grad[idx].sum()
            h = hess[idx].sum()
            return -lr * g / h if h > 0 else 0.0

        root_idx = np.arange(self.Xb.shape[0], dtype=np.int64)
        root = new_node()

        # Per-leaf state: (node, idx, histograms, best split or None).
        leaves = [self._leaf_state(root, root_idx, None)]
        while len(leaves) < p["num_leaves"]:
            best_i = -1
            best_gain = 0.0
            for i, state in enumerate(leaves):
                split = state["split"]
                if split is not None and split[3] > best_gain:
                    best_gain = split[3]
                    best_i = i
            if best_i < 0:
                break

            state = leaves.pop(best_i)
            node, idx = state["node"], state["idx"]
            _, feat, bin_thr, _ = state["split"]
            go_left = self.Xb[idx, feat] <= bin_thr
            left_idx, right_idx = idx[go_left], idx[~go_left]

            feature[node] = feat
            # Raw threshold equivalent of the bin split: bin <= t  <=>
            # x < edges[t] under side='right' binning.
            threshold[node] = float(self.edges[feat][bin_thr])
            left_node, right_node = new_node(), new_node()
            left[node], right[node] = left_node, right_node

            # Build the smaller child directly, derive the larger by
            # subtraction from the parent histograms.
            hg, hh, hc = state["hist"]
            if len(left_idx) <= len(right_idx):
                small_node, small_idx = left_node, left_idx
                big_node, big_idx = right_node, right_idx
            else:
                small_node, small_idx = right_node, right_idx
                big_node, big_idx = left_node, left_idx
            small_hist = build_histograms(self.Xb, small_idx, grad, hess,
                                          self.offsets, self.total_bins)
            big_hist = (hg - small_hist[0], hh - small_hist[1],
                        hc - small_hist[2])
            leaves.append(self._leaf_state(small_node, small_idx, small_hist))
            leaves.append(self._leaf_state(big_node, big_idx, big_hist))

        for state in leaves:
            value[state["node"]] = leaf_value(state["idx"])

        return Tree(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold, dtype=np.float64),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            value=np.asarray(value, dtype=np.float64),
            n_samples=np.zeros(len(feature), dtype=np.int64),
            strict_less=True,
        ), leaves

    def _leaf_state(self, node, idx, hist, grad=None, hess=None):
        if hist is None:
            hist = build_histograms(self.Xb, idx, self._grad, self._hess,
                                    self.offsets, self.total_bins)
        split = best_histogram_split(
            hist[0], hist[1], hist[2], self.offsets, self.n_bins,
            self.params["min_child_samples"], self.params["min_sum_hessian"])
        return {"node": node, "idx": idx, "hist": hist,
                "split": split if split[0] else None}


def _train_lgbm(X, y, seed, params):
    n, width = X.shape
    edges = make_bins(X, params["max_bins"])
    Xb, n_bins = bin_matrix(X, edges)
    booster = _LeafwiseBooster(Xb, n_bins, edges, params)

    p1 = y.mean()
    base = float(np.log(p1 / (1.0 - p1)))
    f = np.full(n, base, dtype=np.float64)
    yf = y.astype(np.float64)

    trees = []
    for _ in range(params["n_estimators"]):
        prob = 1.0 / (1.0 + np.exp(-np.clip(f, -60.0, 60.0)))
        grad = prob - yf
        hess = prob * (1.0 - prob)
        tree, leaves = booster.grow_tree(grad, hess)
        trees.append(tree)
        for state in leaves:
            f[state["idx"]] += tree.value[state["node"]]
    return GradientBoostingModel(algorithm="LGBM", hyperparams=params,
                                 seed=seed, n_features=width, trees=trees,
                                 base_margin=base)


def _svm_objective(wb, Xs, ysigned, C):
    w, b = wb[:-1], wb[-1]
    margins = 1.0 - ysigned * (Xs @ w + b)
    active = np.maximum(margins, 0.0)
    obj = 0.5 * w @ w + C * np.sum(active * active)
    coeff = -2.0 * C * ysigned * active
    grad_w = w + Xs.T @ coeff
    grad_b = np.sum(coeff)
    return obj, np.append(grad_w, grad_b)


def _train_svm(X, y, seed, params):
    n, width = X.shape
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    Xs = (X - mean) / scale
    ysigned = np.where(y == 1, 1.0, -1.0)
    C = float(params["C"])
    tol = float(params["tol"])
    max_iter = int(params["max_iter"])

    # Deterministic full-batch gradient descent with Armijo backtracking;
    # converged means the relative objective change dropped below tol
    # before the iteration cap.
    wb = np.zeros(width + 1, dtype=np.float64)
    obj, grad = _svm_objective(wb, Xs, ysigned, C)
    step = 1.0 / max(1.0, C * n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g2 = grad @ grad
        if g2 == 0.0:
            converged = True
            break
        t = step * 2.0
        while True:
            candidate = wb - t * grad
            new_obj, new_grad = _svm_objective(candidate, Xs, ysigned, C)
            if new_obj <= obj - 0.5 * t * g2 or t < 1e-18:
                break
            t *= 0.5
        step = t
        rel_change = abs(obj - new_obj) / max(abs(obj), 1e-12)
        wb, obj, grad = candidate, new_obj, new_grad
        if rel_change < tol:
            converged = True
            break

    return LinearSvmModel(algorithm="SVM", hyperparams=params, seed=seed,
                          n_features=width, converged=converged,
                          weights=wb[:-1], intercept=float(wb[-1]),
                          mean=mean, scale=scale, n_iter=it)


_TRAINERS = {"DT": _train_dt, "RF": _train_rf,
             "LGBM": _train_lgbm, "SVM": _train_svm}


def train(algorithm: str, X, y, seed: int,
          hyperparams: dict | None = None) -> TrainedModel:
    """Fit one detector; deterministic given all arguments."""
    params = resolve_hyperparams(algorithm, hyperparams)
    X, y = _validate_training_input(X, y)
    return _TRAINERS[algorithm](X, y, seed, params)


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)


def score(model: TrainedModel, X) -> np.ndarray:
    return model.score(X)
