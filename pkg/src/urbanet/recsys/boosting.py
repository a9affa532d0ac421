"""Class-weighted gradient boosting with leaf-wise regression trees on
binary logistic loss.

Training is seed-deterministic and row-order independent: rows are put into
a canonical lexicographic order first, split search scans features in index
order with exact (non-histogram) thresholds at midpoints of distinct values,
and ties keep the earliest candidate. Leaf values are shrunk by the learning
rate when stored, so a raw score is just base_score plus the tree outputs.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HYPERPARAM_RANGES = {
    "n_trees": (100, 300),
    "learning_rate": (0.01, 0.1),
    "max_depth": (3, 10),
    "num_leaves": (20, 50),
    "min_child_samples": (10, 30),
    "reg_alpha": (0.0, 0.5),
    "reg_lambda": (0.0, 0.5),
}

DEFAULT_HYPERPARAMS = {
    "n_trees": 150,
    "learning_rate": 0.05,
    "max_depth": 6,
    "num_leaves": 31,
    "min_child_samples": 20,
    "reg_alpha": 0.0,
    "reg_lambda": 0.1,
}


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class Tree:
    feature: np.ndarray  # split feature index, -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # shrunk leaf value, 0 at internal nodes
    count: np.ndarray  # training rows reaching each node

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        active = self.feature[idx] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            nodes = idx[rows]
            go_left = X[rows, self.feature[nodes]] <= self.threshold[nodes]
            idx[rows] = np.where(go_left, self.left[nodes], self.right[nodes])
            active = self.feature[idx] >= 0
        return self.value[idx]

    def expected_value(self) -> float:
        """Coverage-weighted mean leaf value (path-dependent expectation of
        the empty feature set)."""
        leaves = self.feature < 0
        total = self.count[0]
        return float((self.value[leaves] * self.count[leaves]).sum() / total)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "count": self.count.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=float),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=float),
            count=np.asarray(d["count"], dtype=float),
        )


@dataclass
class TreeEnsembleModel:
    trees: list[Tree]
    learning_rate: float
    base_score: float
    positive_class_weight: float
    hyperparams: dict
    feature_names: list[str]
    seed: int
    extra: dict = field(default_factory=dict)

    def raw_score(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(len(X), self.base_score)
        for tree in self.trees:
            out += tree.predict_raw(X)
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.raw_score(X))

    def predict(self, X: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(int)

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "learning_rate": self.learning_rate,
            "base_score": self.base_score,
            "positive_class_weight": self.positive_class_weight,
            "hyperparams": self.hyperparams,
            "feature_names": self.feature_names,
            "seed": self.seed,
            "extra": self.extra,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsembleModel":
        return cls(
            trees=[Tree.from_dict(t) for t in d["trees"]],
            learning_rate=d["learning_rate"],
            base_score=d["base_score"],
            positive_class_weight=d["positive_class_weight"],
            hyperparams=d["hyperparams"],
            feature_names=list(d["feature_names"]),
            seed=d["seed"],
            extra=d.get("extra", {}),
        )

    @classmethod
    def load(cls, path) -> "TreeEnsembleModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _soft_threshold(g: float, alpha: float) -> float:
    if g > alpha:
        return g - alpha
    if g < -alpha:
        return g + alpha
    return 0.0


def _leaf_objective(G: float, H: float, alpha: float, lam: float) -> float:
    denom = H + lam
    if denom <= 0:
        return 0.0
    t = _soft_threshold(G, alpha)
    return t * t / denom


def _leaf_value(G: float, H: float, alpha: float, lam: float, lr: float) -> float:
    denom = H + lam
    if denom <= 0:
        return 0.0
    return -_soft_threshold(G, alpha) / denom * lr


def _best_split(X, g, h, rows, alpha, lam, min_child):
    """Exact split search over all features; returns (gain, feature,
    threshold, left_rows, right_rows) or None. Ties keep the lowest feature
    index and threshold because only strict improvements replace the best."""
    G = float(g[rows].sum())
    H = float(h[rows].sum())
    parent = _leaf_objective(G, H, alpha, lam)
    best = None
    n = len(rows)
    for f in range(X.shape[1]):
        values = X[rows, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        sg = np.cumsum(g[rows][order])
        sh = np.cumsum(h[rows][order])
        # candidate boundaries between distinct consecutive values
        cut = np.flatnonzero(sv[:-1] < sv[1:])
        cut = cut[(cut + 1 >= min_child) & (n - cut - 1 >= min_child)]
        for i in cut:
            GL, HL = float(sg[i]), float(sh[i])
            gain = 0.5 * (
                _leaf_objective(GL, HL, alpha, lam)
                + _leaf_objective(G - GL, H - HL, alpha, lam)
                - parent
            )
            if best is None or gain > best[0] + 1e-15:
                threshold = (sv[i] + sv[i + 1]) / 2.0
                best = (gain, f, threshold, rows[order[: i + 1]], rows[order[i + 1:]])
    if best is None or best[0] <= 1e-12:
        return None
    return best


def _grow_tree(X, g, h, params) -> Tree:
    alpha = params["reg_alpha"]
    lam = params["reg_lambda"]
    lr = params["learning_rate"]
    max_depth = params["max_depth"]
    num_leaves = params["num_leaves"]
    min_child = params["min_child_samples"]

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    count = [len(X)]
    depth = {0: 0}
    rows_of = {0: np.arange(len(X))}

    heap = []  # (-gain, node_id, split)
    n_leaves = 1

    def push_candidate(node):
        if depth[node] >= max_depth:
            return
        split = _best_split(X, g, h, rows_of[node], alpha, lam, min_child)
        if split is not None:
            heapq.heappush(heap, (-split[0], node, split))

    push_candidate(0)
    while heap and n_leaves < num_leaves:
        _, node, (gain, f, thr, rows_l, rows_r) = heapq.heappop(heap)
        li, ri = len(feature), len(feature) + 1
        feature += [-1, -1]
        threshold += [0.0, 0.0]
        left += [-1, -1]
        right += [-1, -1]
        count += [len(rows_l), len(rows_r)]
        feature[node] = f
        threshold[node] = thr
        left[node] = li
        right[node] = ri
        depth[li] = depth[ri] = depth[node] + 1
        rows_of[li], rows_of[ri] = rows_l, rows_r
        del rows_of[node]
        n_leaves += 1
        push_candidate(li)
        push_candidate(ri)

    value = np.zeros(len(feature))
    for node, rows in rows_of.items():
        value[node] = _leaf_value(float(g[rows].sum()), float(h[rows].sum()), alpha, lam, lr)
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=value,
        count=np.asarray(count, dtype=float),
    )


def train(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: list[str],
    hyperparams: dict | None = None,
    seed: int = 0,
) -> TreeEnsembleModel:
    """Boosted logistic classifier with positive examples weighted by the
    negative/positive count ratio, so the zero-tree prediction is 0.5."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    params = dict(DEFAULT_HYPERPARAMS)
    params.update(hyperparams or {})

    for j, name in enumerate(feature_names):
        if not np.isfinite(X[:, j]).all():
            raise ValueError(f"non-finite values in feature {name!r}")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("training data must contain both classes")
    pos_weight = n_neg / n_pos

    # canonical order: training must not depend on how rows arrived
    order = np.lexsort((y,) + tuple(X[:, j] for j in reversed(range(X.shape[1]))))
    X = X[order]
    y = y[order]

    w = np.where(y == 1, pos_weight, 1.0)
    base_score = float(np.log(w[y == 1].sum() / w[y == 0].sum()))

    F = np.full(len(y), base_score)
    trees: list[Tree] = []
    for _ in range(params["n_trees"]):
        p = sigmoid(F)
        grad = w * (p - y)
        hess = w * p * (1.0 - p)
        tree = _grow_tree(X, grad, hess, params)
        trees.append(tree)
        F += tree.predict_raw(X)

    return TreeEnsembleModel(
        trees=trees,
        learning_rate=params["learning_rate"],
        base_score=base_score,
        positive_class_weight=pos_weight,
        hyperparams=params,
        feature_names=list(feature_names),
        seed=seed,
    )


def evaluate(model: TreeEnsembleModel, X: np.ndarray, y: np.ndarray) -> dict:
    """Positive-class recall/precision/F1 plus confusion counts."""
    if len(y) == 0:
        raise ValueError("empty test set")
    pred = model.predict(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(int)
    return confusion_metrics(y, pred)


def confusion_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    tn = int(((y_true == 0) & (y_pred == 0)).sum())
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"recall": recall, "precision": precision, "f1": f1,
            "tp": tp, "fp": fp, "fn": fn, "tn": tn}
