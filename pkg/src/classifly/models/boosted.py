"""Multiclass AdaBoost (SAMME) over weighted Gini trees.

Each round fits a weighted tree capped at ``max_splits`` internal nodes,
computes the weighted error eps and receives the SAMME learner weight
``learning_rate * (ln((1 - eps)/eps) + ln(K - 1))``. Rounds stop early
when eps reaches the random-guessing bound ``1 - 1/K`` or when a learner
is perfect (kept with a large capped weight). Confidence scores are the
ensemble's normalized weighted vote shares per class.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DegenerateLabels, TooFewSamples
from .base import Dataset
from .tree import TreeModel, tree_train

PERFECT_LEARNER_WEIGHT = 1e3


class BoostedModel:
    variant = "boosted"

    def __init__(self, trees, weights, class_names, learning_rate, max_splits):
        self.trees = list(trees)
        self.weights = np.asarray(weights, dtype=float)
        self.class_names = list(class_names)
        self.learning_rate = float(learning_rate)
        self.max_splits = int(max_splits)

    @property
    def n_learners(self):
        return len(self.trees)

    def predict_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        votes = np.zeros((X.shape[0], len(self.class_names)))
        for tree, weight in zip(self.trees, self.weights):
            labels, _ = tree.predict_batch(X)
            votes[np.arange(X.shape[0]), labels] += weight
        scores = votes / self.weights.sum()
        return np.argmax(scores, axis=1), scores

    def predict(self, x):
        labels, scores = self.predict_batch(np.asarray(x, dtype=float)[None, :])
        return int(labels[0]), scores[0]

    def to_dict(self):
        return {
            "variant": self.variant,
            "class_names": self.class_names,
            "learning_rate": self.learning_rate,
            "max_splits": self.max_splits,
            "weights": [float(v) for v in self.weights],
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            trees=[TreeModel.from_dict(t) for t in payload["trees"]],
            weights=payload["weights"],
            class_names=payload["class_names"],
            learning_rate=payload["learning_rate"],
            max_splits=payload["max_splits"],
        )


def boosted_train(data: Dataset, n_learners=402, max_splits=125, learning_rate=0.792):
    """Fit the SAMME ensemble; sample weights start uniform and renormalize each round."""
    if data.n < 2:
        raise TooFewSamples("boosting needs at least two samples")
    if np.unique(data.y).size < 2:
        raise DegenerateLabels("boosting needs at least two distinct labels")
    n_classes = len(data.class_names)
    w = np.full(data.n, 1.0 / data.n)
    trees: list[TreeModel] = []
    alphas: list[float] = []
    for _ in range(n_learners):
        tree = tree_train(data, max_splits=max_splits, sample_weight=w)
        predicted, _ = tree.predict_batch(data.X)
        missed = predicted != data.y
        eps = float(w[missed].sum())
        if eps <= 0.0:
            trees.append(tree)
            alphas.append(PERFECT_LEARNER_WEIGHT)
            break
        if eps >= 1.0 - 1.0 / n_classes:
            if not trees:
                # Degenerate first round: keep the tree so the model stays usable.
                trees.append(tree)
                alphas.append(1.0)
            break
        alpha = learning_rate * (math.log((1.0 - eps) / eps) + math.log(n_classes - 1))
        trees.append(tree)
        alphas.append(alpha)
        w = w * np.exp(alpha * missed)
        w /= w.sum()
    return BoostedModel(trees, alphas, data.class_names, learning_rate, max_splits)


def boosted_predict(model: BoostedModel, x):
    return model.predict(x)
