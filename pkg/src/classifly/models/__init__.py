"""The four classifier families with a shared JSON round-trip surface.

Confidence scores are numpy vectors aligned with ``class_names``: entries
in [0, 1] summing to 1, argmax equal to the prediction. Trained models are
immutable and safe to share across threads for prediction.
"""

from __future__ import annotations

from ..errors import DataError
from ..ioutil import read_json, write_json
from .base import Dataset, Standardizer
from .boosted import BoostedModel, boosted_predict, boosted_train
from .knn import KnnModel, knn_predict, knn_train
from .search import (
    MODEL_FAMILIES,
    SearchResult,
    cross_val_accuracy,
    default_search_ranges,
    random_search,
    stratified_folds,
    train_model,
)
from .svm import SvmModel, svm_predict, svm_train
from .tree import TreeModel, tree_predict, tree_train

_MODEL_CLASSES = {cls.variant: cls for cls in (KnnModel, TreeModel, BoostedModel, SvmModel)}


def model_from_dict(payload):
    variant = payload.get("variant")
    cls = _MODEL_CLASSES.get(variant)
    if cls is None:
        raise DataError(f"unknown model variant {variant!r}")
    return cls.from_dict(payload)


def save_model(model, path):
    """Serialize any trained model to a single JSON document."""
    write_json(model.to_dict(), path)


def load_model(path):
    return model_from_dict(read_json(path))


__all__ = [
    "Dataset",
    "Standardizer",
    "KnnModel",
    "TreeModel",
    "BoostedModel",
    "SvmModel",
    "MODEL_FAMILIES",
    "SearchResult",
    "knn_train",
    "knn_predict",
    "tree_train",
    "tree_predict",
    "boosted_train",
    "boosted_predict",
    "svm_train",
    "svm_predict",
    "train_model",
    "random_search",
    "cross_val_accuracy",
    "default_search_ranges",
    "stratified_folds",
    "save_model",
    "load_model",
    "model_from_dict",
]
