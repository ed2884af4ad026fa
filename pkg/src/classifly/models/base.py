"""Shared model-facing containers: Dataset and input standardization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class Dataset:
    """Feature matrix with integer labels indexing ``class_names``.

    ``icao24s`` is optional bookkeeping used by the pipeline to map rows
    back to aircraft; models ignore it.
    """

    X: np.ndarray
    y: np.ndarray
    class_names: list[str]
    icao24s: list[str] | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise DataError("X must be a 2-D matrix")
        if self.X.shape[0] != self.y.size:
            raise DataError("X and y row counts differ")
        if not np.all(np.isfinite(self.X)):
            raise DataError("X contains non-finite entries")
        if self.y.size and (self.y.min() < 0 or self.y.max() >= len(self.class_names)):
            raise DataError("labels index outside class_names")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        icaos = [self.icao24s[i] for i in indices] if self.icao24s is not None else None
        return Dataset(self.X[indices], self.y[indices], list(self.class_names), icaos)


@dataclass
class Standardizer:
    """Per-column training-set mean/std; zero-variance columns are only centered."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=float)
        return cls(mean=X.mean(axis=0), std=X.std(axis=0))

    def transform(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        centered = X - self.mean
        scale = np.where(self.std > 0, self.std, 1.0)
        return centered / scale

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_dict(cls, payload):
        return cls(mean=np.array(payload["mean"], dtype=float), std=np.array(payload["std"], dtype=float))
