"""Exact per-feature attribution for tree ensembles.

The tree traversal keeps a path of unique features with, per feature, the
fraction of subsets that flow down when the feature is out of the coalition
(zero fraction) or in it (one fraction), and a weight vector holding the
proportion of coalition subsets of each size. Extending and unwinding that
weight vector yields each feature's exact Shapley value in one pass per
leaf, with conditional expectations taken over training-coverage ratios.
Attributions satisfy local accuracy: base value plus contributions equals
the raw model output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import Tree, TreeEnsembleModel, confusion_metrics


@dataclass
class Attribution:
    shapley: dict[str, float]
    base_value: float
    raw_output: float

    def top_factors(self, n: int = 3) -> list[tuple[str, float]]:
        ranked = sorted(self.shapley.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
        return ranked[:n]


def _tree_shap(tree: Tree, x: np.ndarray, phi: np.ndarray) -> None:
    feature = tree.feature
    threshold = tree.threshold
    left = tree.left
    right = tree.right
    value = tree.value
    count = tree.count

    def extend(path, pz, po, pi):
        path = [entry.copy() for entry in path]
        l = len(path)
        path.append([pi, pz, po, 1.0 if l == 0 else 0.0])
        for i in range(l - 1, -1, -1):
            path[i + 1][3] += po * path[i][3] * (i + 1) / (l + 1)
            path[i][3] = pz * path[i][3] * (l - i) / (l + 1)
        return path

    def unwind(path, i):
        path = [entry.copy() for entry in path]
        l = len(path)
        one = path[i][2]
        zero = path[i][1]
        n = path[l - 1][3]
        for j in range(l - 2, -1, -1):
            if one != 0:
                t = path[j][3]
                path[j][3] = n * l / ((j + 1) * one)
                n = t - path[j][3] * zero * (l - j - 1) / l
            else:
                path[j][3] = path[j][3] * l / (zero * (l - j - 1))
        for j in range(i, l - 1):
            path[j][0] = path[j + 1][0]
            path[j][1] = path[j + 1][1]
            path[j][2] = path[j + 1][2]
        path.pop()
        return path

    def recurse(node, path, pz, po, pi):
        path = extend(path, pz, po, pi)
        f = feature[node]
        if f < 0:
            for i in range(1, len(path)):
                w = sum(entry[3] for entry in unwind(path, i))
                d, z, o = path[i][0], path[i][1], path[i][2]
                phi[d] += w * (o - z) * value[node]
            return
        if x[f] <= threshold[node]:
            hot, cold = left[node], right[node]
        else:
            hot, cold = right[node], left[node]
        iz, io = 1.0, 1.0
        k = next((i for i in range(1, len(path)) if path[i][0] == f), None)
        if k is not None:
            iz, io = path[k][1], path[k][2]
            path = unwind(path, k)
        r = count[node]
        recurse(hot, path, iz * count[hot] / r, io, f)
        recurse(cold, path, iz * count[cold] / r, 0.0, f)

    recurse(0, [], 1.0, 1.0, -1)


def shapley_attribution(model: TreeEnsembleModel, example) -> Attribution:
    """Exact path-dependent Shapley values for one example, summed over the
    ensemble's trees; contributions are on the raw (log-odds) scale."""
    x = np.asarray(example, dtype=float)
    n_features = len(model.feature_names)
    phi = np.zeros(n_features)
    base = model.base_score
    for tree in model.trees:
        _tree_shap(tree, x, phi)
        base += tree.expected_value()
    raw = float(model.raw_score(x.reshape(1, -1))[0])
    return Attribution(
        shapley={name: float(phi[i]) for i, name in enumerate(model.feature_names)},
        base_value=base,
        raw_output=raw,
    )


def permutation_importance(
    model: TreeEnsembleModel,
    X: np.ndarray,
    y: np.ndarray,
    metric: str = "f1",
    repeats: int = 5,
    seed: int = 0,
) -> dict[str, float]:
    """Mean drop of the chosen metric when one feature column is shuffled in
    held-out data, averaged over repeats."""
    if metric not in ("f1", "recall"):
        raise ValueError("metric must be 'f1' or 'recall'")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    if len(y) < 10:
        raise ValueError("need at least 10 test examples")
    rng = np.random.default_rng(seed)
    baseline = confusion_metrics(y, model.predict(X))[metric]
    drops: dict[str, float] = {}
    for j, name in enumerate(model.feature_names):
        total = 0.0
        for _ in range(repeats):
            perm = rng.permutation(len(y))
            shuffled = X.copy()
            shuffled[:, j] = X[perm, j]
            total += baseline - confusion_metrics(y, model.predict(shuffled))[metric]
        drops[name] = total / repeats
    return drops


def mean_abs_shapley(model: TreeEnsembleModel, X: np.ndarray, max_rows: int | None = None) -> dict[str, float]:
    """Mean |Shapley| per feature over (a sample of) a dataset, the usual
    global-importance summary."""
    X = np.asarray(X, dtype=float)
    if max_rows is not None and len(X) > max_rows:
        step = len(X) / max_rows
        X = X[np.floor(np.arange(max_rows) * step).astype(int)]
    totals = np.zeros(len(model.feature_names))
    for row in X:
        att = shapley_attribution(model, row)
        totals += np.abs([att.shapley[n] for n in model.feature_names])
    return {name: float(totals[i] / len(X)) for i, name in enumerate(model.feature_names)}
