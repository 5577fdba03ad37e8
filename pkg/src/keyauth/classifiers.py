"""Multi-class user identification models: neural nets, random forest, linear SVM."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import nn
from .dataset import ClassSplit
from .evaluation import ClassifierMetrics, classifier_metrics
from .features import N_FEATURES

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Standardizer:
    """Per-column z-scaling fit on training data only."""

    mean: np.ndarray
    std: np.ndarray

    @staticmethod
    def fit(train_x: np.ndarray) -> "Standardizer":
        return Standardizer(mean=train_x.mean(axis=0),
                            std=np.maximum(train_x.std(axis=0), STD_FLOOR))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


class ChannelView(nn.Layer):
    """(N, d) -> (N, 1, d) so conv layers can consume flat feature vectors."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x[:, None, :]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out[:, 0, :]

    def spec(self) -> dict:
        return {"kind": "channel_view"}


def fc_architecture(n_classes: int, rng: np.random.Generator) -> list[nn.Layer]:
    """31 -> 80 -> 60 -> n_classes, relu between dense layers."""
    return [
        nn.Dense(N_FEATURES, 80, rng), nn.Relu(),
        nn.Dense(80, 60, rng), nn.Relu(),
        nn.Dense(60, n_classes, rng),
    ]


def cnn_architecture(n_classes: int, rng: np.random.Generator) -> list[nn.Layer]:
    """Two same-padded kernel-3 conv layers (16 then 32 channels), flatten to
    992 = 31 x 32, then dense 992 -> 128 -> n_classes."""
    return [
        ChannelView(),
        nn.Conv1d(1, 16, kernel=3, padding=1, rng=rng), nn.Relu(),
        nn.Conv1d(16, 32, kernel=3, padding=1, rng=rng), nn.Relu(),
        nn.Flatten(),
        nn.Dense(992, 128, rng), nn.Relu(),
        nn.Dense(128, n_classes, rng),
    ]


@dataclass
class NnModel:
    layers: list[nn.Layer]
    standardizer: Standardizer
    history: nn.TrainHistory
    metrics: ClassifierMetrics


def train_nn(arch: str, split: ClassSplit,
             config: nn.TrainConfig | None = None) -> NnModel:
    """Train the fully connected or 1-D conv classifier on a standardized split."""
    cfg = config or nn.TrainConfig()
    rng = np.random.default_rng(cfg.seed)
    std = Standardizer.fit(split.train_x)
    builders = {"fc": fc_architecture, "cnn1d": cnn_architecture}
    if arch not in builders:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {sorted(builders)}")
    layers = builders[arch](split.n_classes, rng)
    history = nn.train(layers, std.apply(split.train_x), split.train_y,
                       std.apply(split.val_x), split.val_y, cfg)
    preds = predict_nn(layers, std.apply(split.test_x))
    metrics = classifier_metrics(preds, split.test_y, split.n_classes)
    return NnModel(layers=layers, standardizer=std, history=history, metrics=metrics)


def predict_nn(layers: Sequence[nn.Layer], x: np.ndarray) -> np.ndarray:
    """Argmax over logits; ties break to the lowest class index."""
    return np.argmax(nn.predict_logits(layers, x), axis=1)


@dataclass(frozen=True)
class NegativeClassReport:
    accuracy: float
    recall: float
    precision: float
    f_score: float
    metrics: ClassifierMetrics


def evaluate_negative_class(preds: np.ndarray, labels: np.ndarray,
                            n_classes: int) -> NegativeClassReport:
    """One-vs-rest metrics for the last (negative) class."""
    metrics = classifier_metrics(preds, labels, n_classes)
    neg = n_classes - 1
    return NegativeClassReport(
        accuracy=metrics.accuracy,
        recall=float(metrics.recall[neg]),
        precision=float(metrics.precision[neg]),
        f_score=float(metrics.f_score[neg]),
        metrics=metrics,
    )


# --- random forest ---

@dataclass
class TreeNodes:
    """Flat array-of-struct decision tree; children index -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray


def _best_split(x: np.ndarray, y: np.ndarray, features: np.ndarray,
                n_classes: int) -> tuple[int, float, float] | None:
    """Lowest weighted-Gini split over the candidate features, or None."""
    n = y.size
    best: tuple[float, int, float] | None = None
    onehot = np.eye(n_classes)[y]
    for f in features:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        counts_left = np.cumsum(onehot[order], axis=0)  # counts among first i+1
        total = counts_left[-1]
        # split after position i (left = first i+1 rows), only where value changes
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if valid.size == 0:
            continue
        nl = (valid + 1).astype(np.float64)
        nr = n - nl
        cl = counts_left[valid]
        cr = total - cl
        gini_l = 1.0 - ((cl / nl[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((cr / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gini_l + nr * gini_r) / n
        k = int(np.argmin(weighted))
        if best is None or weighted[k] < best[0]:
            thr = (xs[valid[k]] + xs[valid[k] + 1]) / 2.0
            best = (float(weighted[k]), int(f), thr)
    if best is None:
        return None
    return best[1], best[2], best[0]


def _grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, max_features: int,
               rng: np.random.Generator) -> TreeNodes:
    feature, threshold, left, right, leaf_class = [], [], [], [], []

    def new_node() -> int:
        feature.append(-1); threshold.append(0.0)
        left.append(-1); right.append(-1); leaf_class.append(-1)
        return len(feature) - 1

    def build(idx: np.ndarray) -> int:
        node = new_node()
        ys = y[idx]
        counts = np.bincount(ys, minlength=n_classes)
        if counts.max() == ys.size:  # pure
            leaf_class[node] = int(np.argmax(counts))
            return node
        cand = rng.choice(x.shape[1], size=min(max_features, x.shape[1]),
                          replace=False)
        split = _best_split(x[idx], ys, cand, n_classes)
        if split is None:  # candidates constant: fall back to all features
            split = _best_split(x[idx], ys, np.arange(x.shape[1]), n_classes)
        if split is None:
            leaf_class[node] = int(np.argmax(counts))
            return node
        f, thr, _ = split
        go_left = x[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = build(idx[go_left])
        right[node] = build(idx[~go_left])
        return node

    build(np.arange(x.shape[0]))
    return TreeNodes(
        feature=np.array(feature), threshold=np.array(threshold),
        left=np.array(left), right=np.array(right),
        leaf_class=np.array(leaf_class),
    )


def _tree_predict(tree: TreeNodes, x: np.ndarray) -> np.ndarray:
    node = np.zeros(x.shape[0], dtype=np.int64)
    active = tree.leaf_class[node] < 0
    while active.any():
        f = tree.feature[node[active]]
        thr = tree.threshold[node[active]]
        go_left = x[active, f] <= thr
        nxt = np.where(go_left, tree.left[node[active]], tree.right[node[active]])
        node[active] = nxt
        active = tree.leaf_class[node] < 0
    return tree.leaf_class[node]


@dataclass
class ForestModel:
    trees: list[TreeNodes]
    n_classes: int


def train_random_forest(split: ClassSplit, n_trees: int = 100,
                        max_features: int = 5, seed: int = 0,
                        bootstrap: bool = True) -> ForestModel:
    """Gini-split trees grown to purity on bootstrap samples."""
    rng = np.random.default_rng(seed)
    x, y = split.train_x, split.train_y
    trees = []
    for _ in range(n_trees):
        if bootstrap:
            idx = rng.choice(x.shape[0], size=x.shape[0], replace=True)
        else:
            idx = np.arange(x.shape[0])
        trees.append(_grow_tree(x[idx], y[idx], split.n_classes, max_features, rng))
    return ForestModel(trees=trees, n_classes=split.n_classes)


def predict_forest(model: ForestModel, x: np.ndarray) -> np.ndarray:
    """Majority vote over trees; ties break to the lowest class index."""
    votes = np.zeros((x.shape[0], model.n_classes), dtype=np.int64)
    for tree in model.trees:
        preds = _tree_predict(tree, x)
        np.add.at(votes, (np.arange(x.shape[0]), preds), 1)
    return np.argmax(votes, axis=1)


# --- multiclass linear SVM (hinge loss, stochastic subgradient) ---

@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (n_classes, d)
    biases: np.ndarray   # (n_classes,)
    lam: float
    standardizer: Standardizer
    objective_history: list[float] = field(default_factory=list)


def svm_objective(w: np.ndarray, b: np.ndarray, x: np.ndarray, y: np.ndarray,
                  lam: float) -> float:
    """0.5 * sum ||w_j||^2 + lam * sum_i hinge(1 + best wrong margin)."""
    scores = x @ w.T + b
    n = x.shape[0]
    true = scores[np.arange(n), y]
    scores_masked = scores.copy()
    scores_masked[np.arange(n), y] = -np.inf
    runner_up = scores_masked.max(axis=1)
    hinge = np.maximum(0.0, 1.0 + runner_up - true)
    return float(0.5 * (w * w).sum() + lam * hinge.sum())


def train_multiclass_svm(split: ClassSplit, lam: float = 0.01,
                         epochs: int = 60, seed: int = 0,
                         batch_size: int = 64, lr: float = 1e-3,
                         ) -> LinearSvmModel:
    """Stochastic subgradient descent on the multi-class hinge objective."""
    rng = np.random.default_rng(seed)
    std = Standardizer.fit(split.train_x)
    x = std.apply(split.train_x)
    y = split.train_y
    n, d = x.shape
    n_classes = split.n_classes
    w = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    history: list[float] = []
    step = 0
    for _ in range(epochs):
        perm = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            xb, yb = x[idx], y[idx]
            scores = xb @ w.T + b
            m = xb.shape[0]
            true = scores[np.arange(m), yb]
            masked = scores.copy()
            masked[np.arange(m), yb] = -np.inf
            j_star = np.argmax(masked, axis=1)
            violating = 1.0 + masked[np.arange(m), j_star] - true > 0.0
            gw = w.copy()  # regularizer subgradient
            gb = np.zeros(n_classes)
            if violating.any():
                xv = xb[violating]
                yv = yb[violating]
                jv = j_star[violating]
                np.add.at(gw, jv, lam * xv)
                np.add.at(gw, yv, -lam * xv)
                np.add.at(gb, jv, lam)
                np.add.at(gb, yv, -lam)
            step += 1
            eta = lr / (1.0 + 1e-3 * step)
            w -= eta * gw
            b -= eta * gb
        history.append(svm_objective(w, b, x, y, lam))
    return LinearSvmModel(weights=w, biases=b, lam=lam, standardizer=std,
                          objective_history=history)


def predict_svm(model: LinearSvmModel, x: np.ndarray,
                standardized: bool = False) -> np.ndarray:
    if not standardized:
        x = model.standardizer.apply(x)
    scores = x @ model.weights.T + model.biases
    return np.argmax(scores, axis=1)
