"""CART-style binary decision tree with the Gini criterion.

Candidate thresholds are midpoints between consecutive distinct sorted
values per feature; the split maximizing the weighted Gini impurity
decrease wins, ties broken by lower feature index then lower threshold.
Growth is best-first: the leaf whose best split has the largest gain is
expanded next (ties by node creation order) until ``max_splits`` internal
nodes exist or no leaf offers a candidate split. Zero-gain splits on
impure nodes are allowed, which is what lets a depth-2 tree solve XOR.

Per-sample weights are supported so the boosting module can reuse the
builder with weighted impurities.
"""

from __future__ import annotations

import heapq

import numpy as np

from ..errors import TooFewSamples
from .base import Dataset


class TreeModel:
    """Threshold-split binary tree over parallel node arrays."""

    variant = "tree"

    def __init__(self, feature, threshold, left, right, class_counts, class_names):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.class_counts = np.asarray(class_counts, dtype=float)
        self.class_names = list(class_names)

    @property
    def n_internal_nodes(self):
        return int((self.feature >= 0).sum())

    def _leaf_indices(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[nodes]
            active = feat >= 0
            if not active.any():
                return nodes
            rows = np.flatnonzero(active)
            values = X[rows, feat[rows]]
            go_left = values <= self.threshold[nodes[rows]]
            nodes[rows] = np.where(go_left, self.left[nodes[rows]], self.right[nodes[rows]])

    def predict_batch(self, X):
        """Return (labels, scores); scores are the reached leaf's class proportions."""
        leaves = self._leaf_indices(X)
        counts = self.class_counts[leaves]
        totals = counts.sum(axis=1, keepdims=True)
        scores = counts / np.where(totals > 0, totals, 1.0)
        return np.argmax(scores, axis=1), scores

    def predict(self, x):
        labels, scores = self.predict_batch(np.asarray(x, dtype=float)[None, :])
        return int(labels[0]), scores[0]

    def to_dict(self):
        return {
            "variant": self.variant,
            "class_names": self.class_names,
            "feature": self.feature.tolist(),
            "threshold": [float(v) for v in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "class_counts": [[float(v) for v in row] for row in self.class_counts],
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            feature=payload["feature"],
            threshold=payload["threshold"],
            left=payload["left"],
            right=payload["right"],
            class_counts=payload["class_counts"],
            class_names=payload["class_names"],
        )


def _weighted_counts(y, w, n_classes):
    counts = np.zeros(n_classes)
    np.add.at(counts, y, w)
    return counts


def _onehot_weighted(y, w, n_classes):
    out = np.zeros((y.size, n_classes))
    out[np.arange(y.size), y] = w
    return out


def _best_split(Xn, Wn):
    """Best (gain, feature, threshold) over a node's samples, or None.

    ``Wn`` holds per-sample weighted one-hot class rows. The gain is the
    decrease in total weighted Gini mass ``h(W) = sum(W) - sum(W^2)/sum(W)``.
    """
    m = Xn.shape[0]
    if m < 2:
        return None
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    cum = np.cumsum(Wn[order], axis=0)
    total = cum[-1]
    left = cum[:-1]
    right = total[None, :, :] - left

    sum_left = left.sum(axis=2)
    sum_right = right.sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        h_left = np.where(sum_left > 0, sum_left - (left ** 2).sum(axis=2) / sum_left, 0.0)
        h_right = np.where(sum_right > 0, sum_right - (right ** 2).sum(axis=2) / sum_right, 0.0)
    node_sum = float(total[0].sum())
    h_node = node_sum - float((total[0] ** 2).sum()) / node_sum if node_sum > 0 else 0.0
    gain = h_node - h_left - h_right

    thresholds = (xs[:-1] + xs[1:]) / 2.0
    valid = (xs[1:] > xs[:-1]) & (thresholds < xs[1:])
    if not valid.any():
        return None
    gain = np.where(valid, gain, -np.inf)

    per_feature_pos = np.argmax(gain, axis=0)
    per_feature_gain = gain[per_feature_pos, np.arange(gain.shape[1])]
    feature = int(np.argmax(per_feature_gain))
    if not np.isfinite(per_feature_gain[feature]):
        return None
    position = int(per_feature_pos[feature])
    return float(per_feature_gain[feature]), feature, float(thresholds[position, feature])


def _grow(X, y, w, n_classes, max_splits):
    """Best-first tree growth; returns parallel node arrays."""
    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    counts = [_weighted_counts(y, w, n_classes)]
    members = {0: np.arange(X.shape[0])}

    heap = []
    serial = 0

    def consider(node_id):
        nonlocal serial
        idx = members[node_id]
        node_counts = counts[node_id]
        if (node_counts > 0).sum() <= 1:
            return
        split = _best_split(X[idx], _onehot_weighted(y[idx], w[idx], n_classes))
        if split is None:
            return
        gain, feat, thr = split
        heapq.heappush(heap, (-gain, serial, node_id, feat, thr))
        serial += 1

    consider(0)
    internal = 0
    while heap and internal < max_splits:
        _, _, node_id, feat, thr = heapq.heappop(heap)
        idx = members.pop(node_id)
        mask = X[idx, feat] <= thr
        left_idx = idx[mask]
        right_idx = idx[~mask]
        for child_idx in (left_idx, right_idx):
            child_id = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(_weighted_counts(y[child_idx], w[child_idx], n_classes))
            members[child_id] = child_idx
        feature[node_id] = feat
        threshold[node_id] = thr
        left[node_id] = len(feature) - 2
        right[node_id] = len(feature) - 1
        internal += 1
        consider(left[node_id])
        consider(right[node_id])

    return feature, threshold, left, right, counts


def tree_train(data: Dataset, max_splits=1297, criterion="gini", sample_weight=None):
    """Grow a CART tree; ``sample_weight`` enables weighted impurities."""
    if criterion != "gini":
        raise ValueError(f"unsupported criterion {criterion!r}")
    if max_splits < 0:
        raise ValueError("max_splits must be >= 0")
    if data.n < 1:
        raise TooFewSamples("tree training needs at least one sample")
    w = np.full(data.n, 1.0) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    parts = _grow(data.X, data.y, w, len(data.class_names), max_splits)
    return TreeModel(*parts, class_names=data.class_names)


def tree_predict(model: TreeModel, x):
    return model.predict(x)
