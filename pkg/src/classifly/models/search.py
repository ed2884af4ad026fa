"""Randomized hyperparameter search with stratified k-fold cross-validation.

Samples are drawn uniformly per parameter, log-uniformly for the scale
parameters ``C`` and ``learning_rate``. The best iteration by mean CV
accuracy wins; ties go to the earlier iteration, so a fixed seed always
reproduces the same winner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import Dataset
from .boosted import boosted_train
from .knn import knn_train
from .svm import svm_train
from .tree import tree_train

MODEL_FAMILIES = ("knn", "tree", "boosted", "svm")


def train_model(family, data: Dataset, params=None, seed=0):
    """Train one model family with keyword parameters (missing ones default)."""
    params = dict(params or {})
    if family == "knn":
        return knn_train(data, k=int(params.get("k", 4)))
    if family == "tree":
        return tree_train(data, max_splits=int(params.get("max_splits", 1297)))
    if family == "boosted":
        return boosted_train(
            data,
            n_learners=int(params.get("n_learners", 402)),
            max_splits=int(params.get("max_splits", 125)),
            learning_rate=float(params.get("learning_rate", 0.792)),
        )
    if family == "svm":
        return svm_train(data, C=float(params.get("C", 4.795)), seed=seed)
    raise ValueError(f"unknown model family {family!r}")


def default_search_ranges(family):
    if family == "knn":
        return {"k": ("int", 1, 15)}
    if family == "tree":
        return {"max_splits": ("int", 1, 2000)}
    if family == "boosted":
        return {
            "n_learners": ("int", 50, 600),
            "max_splits": ("int", 5, 200),
            "learning_rate": ("log", 0.05, 1.0),
        }
    if family == "svm":
        return {"C": ("log", 0.01, 100.0)}
    raise ValueError(f"unknown model family {family!r}")


def _sample_param(spec, rng):
    kind = spec[0]
    if kind == "int":
        return int(rng.integers(spec[1], spec[2] + 1))
    if kind == "float":
        return float(rng.uniform(spec[1], spec[2]))
    if kind == "log":
        return float(math.exp(rng.uniform(math.log(spec[1]), math.log(spec[2]))))
    if kind == "choice":
        return spec[1][int(rng.integers(len(spec[1])))]
    raise ValueError(f"unknown range kind {kind!r}")


def stratified_folds(y, folds, seed=0):
    """Shuffled per-class round-robin fold assignment; returns test-index arrays."""
    rng = np.random.default_rng(seed)
    y = np.asarray(y)
    assignment = np.empty(y.size, dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def cross_val_accuracy(family, data: Dataset, params, folds=5, seed=0):
    """Mean held-out accuracy over stratified folds."""
    test_sets = stratified_folds(data.y, folds, seed)
    accuracies = []
    everything = np.arange(data.n)
    for test_idx in test_sets:
        if test_idx.size == 0:
            continue
        train_idx = np.setdiff1d(everything, test_idx)
        model = train_model(family, data.subset(train_idx), params, seed=seed)
        predicted, _ = model.predict_batch(data.X[test_idx])
        accuracies.append(float((predicted == data.y[test_idx]).mean()))
    return float(np.mean(accuracies))


@dataclass
class SearchResult:
    family: str
    params: dict
    cv_accuracy: float
    iteration: int
    history: list[dict] = field(default_factory=list)


def random_search(family, data: Dataset, ranges=None, iterations=30, folds=5, seed=0):
    """Sample ``iterations`` parameter sets and return the CV-accuracy argmax."""
    ranges = ranges if ranges is not None else default_search_ranges(family)
    if not ranges:
        raise ValueError("parameter ranges must be non-empty")
    rng = np.random.default_rng(seed)
    best = None
    history = []
    for iteration in range(iterations):
        params = {name: _sample_param(ranges[name], rng) for name in sorted(ranges)}
        accuracy = cross_val_accuracy(family, data, params, folds=folds, seed=seed)
        history.append({"iteration": iteration, "params": params, "cv_accuracy": accuracy})
        if best is None or accuracy > best.cv_accuracy:
            best = SearchResult(family, params, accuracy, iteration)
    best.history = history
    return best
