"""Randomized hyperparameter search with a user-grouped validation split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boosting import HYPERPARAM_RANGES, confusion_metrics, train


def sample_hyperparams(rng: np.random.Generator) -> dict:
    lo, hi = HYPERPARAM_RANGES["n_trees"]
    params = {"n_trees": int(rng.integers(lo, hi + 1))}
    for name in ("max_depth", "num_leaves", "min_child_samples"):
        lo, hi = HYPERPARAM_RANGES[name]
        params[name] = int(rng.integers(lo, hi + 1))
    for name in ("learning_rate", "reg_alpha", "reg_lambda"):
        lo, hi = HYPERPARAM_RANGES[name]
        params[name] = float(rng.uniform(lo, hi))
    return params


def grouped_split(n_rows: int, groups: list[str] | None, test_fraction: float, rng: np.random.Generator):
    """80/20-style split; with groups, whole users land on one side only."""
    if groups is None:
        perm = rng.permutation(n_rows)
        n_test = max(1, int(round(test_fraction * n_rows)))
        test_rows = np.zeros(n_rows, dtype=bool)
        test_rows[perm[:n_test]] = True
        return ~test_rows, test_rows
    unique = sorted(set(groups))
    perm = rng.permutation(len(unique))
    n_test = max(1, int(round(test_fraction * len(unique))))
    test_groups = {unique[i] for i in perm[:n_test]}
    test_rows = np.array([g in test_groups for g in groups])
    return ~test_rows, test_rows


@dataclass
class TrialResult:
    index: int
    params: dict
    f1: float
    metrics: dict


@dataclass
class SearchResult:
    best_params: dict
    best_metrics: dict
    trials: list[TrialResult]


def random_search(
    X: np.ndarray,
    y: np.ndarray,
    feature_names: list[str],
    n_trials: int,
    seed: int = 0,
    groups: list[str] | None = None,
) -> SearchResult:
    """Sample hyperparameters uniformly from the tuning ranges, score each
    trial by validation F1 on a fixed 80/20 split, return the best plus the
    full trial log."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    train_rows, val_rows = grouped_split(len(y), groups, 0.2, rng)
    if y[train_rows].sum() in (0, len(y[train_rows])) or len(y[val_rows]) == 0:
        raise ValueError("validation split left a single-class training set")

    trials: list[TrialResult] = []
    best: TrialResult | None = None
    for i in range(n_trials):
        params = sample_hyperparams(rng)
        model = train(X[train_rows], y[train_rows], feature_names, params, seed=seed + i)
        metrics = confusion_metrics(y[val_rows].astype(int), model.predict(X[val_rows]))
        trial = TrialResult(index=i, params=params, f1=metrics["f1"], metrics=metrics)
        trials.append(trial)
        if best is None or trial.f1 > best.f1:
            best = trial
    return SearchResult(best_params=best.params, best_metrics=best.metrics, trials=trials)
