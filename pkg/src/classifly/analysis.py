"""Feature-quality analytics: entropy, relative mutual information, correlation.

Relative mutual information (RMI) is the percentage of label entropy
removed by knowing a feature. Continuous features are discretized first
with equal-width bins between the 1st and 99th percentiles (nearest-rank),
which keeps outliers from stretching the bin grid. Logarithms are base 2
throughout; the ratio cancels the base but fixed units keep intermediate
entropies testable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabels, EmptyInput, TooFewRows
from .features import feature_names, group_of_index
from .ioutil import atomic_write, write_json

DEFAULT_EWD_BINS = 20


def entropy(labels):
    """Shannon entropy in bits of the empirical label distribution."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInput("entropy of zero labels is undefined")
    _, counts = np.unique(labels, return_counts=True)
    p = counts / labels.size
    return float(-(p * np.log2(p)).sum())


def _nearest_rank(values, probability):
    return float(np.quantile(values, probability, method="inverted_cdf"))


def ewd_discretize(values, bins=DEFAULT_EWD_BINS):
    """Equal-width discretization clamped to the 1st..99th percentile span.

    Returns ``(bin_indices, low, high)``. Values outside the span land in
    the end bins; a degenerate span maps everything to bin 0.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptyInput("cannot discretize an empty series")
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    low = _nearest_rank(values, 0.01)
    high = _nearest_rank(values, 0.99)
    if high == low:
        return np.zeros(values.size, dtype=np.int64), low, high
    width = (high - low) / bins
    indices = np.floor((values - low) / width).astype(np.int64)
    return np.clip(indices, 0, bins - 1), low, high


def _entropy_from_counts(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def rmi(feature_values, labels, bins=DEFAULT_EWD_BINS):
    """Relative mutual information between a feature and labels, in percent."""
    feature_values = np.asarray(feature_values, dtype=float)
    labels = np.asarray(labels)
    if feature_values.size != labels.size:
        raise ValueError("feature and label lengths differ")
    classes, codes = np.unique(labels, return_inverse=True)
    if classes.size < 2:
        raise DegenerateLabels("RMI needs at least two distinct labels")
    indices, _, _ = ewd_discretize(feature_values, bins)
    h_cat = _entropy_from_counts(np.bincount(codes))

    joint = np.zeros((int(indices.max()) + 1, classes.size))
    np.add.at(joint, (indices, codes), 1.0)
    n = labels.size
    h_cond = 0.0
    for row in joint:
        total = row.sum()
        if total:
            h_cond += (total / n) * _entropy_from_counts(row)
    return float(np.clip(100.0 * (h_cat - h_cond) / h_cat, 0.0, 100.0))


def correlation_matrix(feature_matrix):
    """Pearson correlation matrix; constant columns get 0 off-diagonal by convention."""
    X = np.asarray(feature_matrix, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("correlation needs at least two rows")
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.corrcoef(X, rowvar=False)
    matrix = np.atleast_2d(matrix)
    matrix = np.where(np.isfinite(matrix), matrix, 0.0)
    np.fill_diagonal(matrix, 1.0)
    return np.clip(matrix, -1.0, 1.0)


@dataclass
class RmiReport:
    """Per-feature RMI with the discretization used, plus per-group means."""

    bins: int
    q: int
    features: list[dict] = field(default_factory=list)
    group_means: dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {
            "bins": self.bins,
            "q": self.q,
            "features": self.features,
            "group_means": self.group_means,
        }

    def save(self, path):
        write_json(self.to_dict(), path)


def rmi_report(feature_matrix, labels, q, bins=DEFAULT_EWD_BINS):
    """RMI of every feature column against the labels, averaged per group."""
    X = np.asarray(feature_matrix, dtype=float)
    names = feature_names(q)
    if X.shape[1] != len(names):
        raise ValueError(f"expected {len(names)} feature columns, got {X.shape[1]}")
    report = RmiReport(bins=bins, q=q)
    by_group: dict[str, list[float]] = {}
    for index in range(X.shape[1]):
        column = X[:, index]
        indices_low_high = ewd_discretize(column, bins)
        value = rmi(column, labels, bins)
        group = group_of_index(index, q).value
        report.features.append({
            "name": names[index],
            "group": group,
            "rmi_percent": value,
            "low": indices_low_high[1],
            "high": indices_low_high[2],
        })
        by_group.setdefault(group, []).append(value)
    report.group_means = {g: float(np.mean(v)) for g, v in by_group.items()}
    return report


def write_correlation_csv(matrix, names, path):
    """Matrix CSV with feature names on both axes, for external plotting."""
    matrix = np.asarray(matrix, dtype=float)
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", *names])
        for name, row in zip(names, matrix):
            writer.writerow([name, *(f"{float(v):.10f}" for v in row)])
