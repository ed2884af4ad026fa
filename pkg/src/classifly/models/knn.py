"""K-nearest neighbors with city-block distance and inverse-distance voting.

The lazy learner stores the training set verbatim. At query time the k
nearest neighbors by L1 distance vote with weight 1/distance; any
zero-distance neighbors preempt the vote, and the prediction is then the
majority among those exact matches only. Ties at the k-th rank break
toward the lower training index; score/argmax ties break toward the lower
class ordinal.
"""

from __future__ import annotations

import numpy as np

from ..errors import TooFewSamples
from .base import Dataset

_QUERY_CHUNK = 256


class KnnModel:
    variant = "knn"

    def __init__(self, X, y, class_names, k):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        self.class_names = list(class_names)
        self.k = int(k)

    def predict_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n_classes = len(self.class_names)
        labels = np.empty(X.shape[0], dtype=np.int64)
        scores = np.empty((X.shape[0], n_classes))
        for start in range(0, X.shape[0], _QUERY_CHUNK):
            chunk = X[start:start + _QUERY_CHUNK]
            dists = np.abs(chunk[:, None, :] - self.X[None, :, :]).sum(axis=2)
            nearest = np.argsort(dists, axis=1, kind="stable")[:, :self.k]
            for row in range(chunk.shape[0]):
                sel = nearest[row]
                dsel = dists[row, sel]
                ysel = self.y[sel]
                exact = dsel == 0.0
                weights = np.zeros(n_classes)
                if exact.any():
                    np.add.at(weights, ysel[exact], 1.0)
                else:
                    np.add.at(weights, ysel, 1.0 / dsel)
                total = weights.sum()
                out = start + row
                scores[out] = weights / total
                labels[out] = np.argmax(weights)
        return labels, scores

    def predict(self, x):
        labels, scores = self.predict_batch(np.asarray(x, dtype=float)[None, :])
        return int(labels[0]), scores[0]

    def to_dict(self):
        return {
            "variant": self.variant,
            "class_names": self.class_names,
            "k": self.k,
            "X": [[float(v) for v in row] for row in self.X],
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(X=payload["X"], y=payload["y"], class_names=payload["class_names"], k=payload["k"])


def knn_train(data: Dataset, k=4):
    """Store the training set verbatim; validates ``1 <= k <= n``."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if data.n < k:
        raise TooFewSamples(f"need at least k={k} samples, got {data.n}")
    return KnnModel(data.X, data.y, data.class_names, k)


def knn_predict(model: KnnModel, x):
    return model.predict(x)
