"""Classifiers: k-NN, CART random forest and gradient-boosted trees."""

import numpy as np

from .config import MODEL_KINDS, ModelConfig, make_model
from .gbdt import GBDTClassifier
from .knn import KNNClassifier
from .persist import load_model, model_from_dict, model_to_dict, save_model
from .tree import DecisionTreeClassifier, RandomForestClassifier, Tree


def feature_importance(model) -> np.ndarray:
    """Number of split nodes using each feature, summed over all trees."""
    if isinstance(model, KNNClassifier):
        raise TypeError("feature importance is defined for tree models only")
    if not hasattr(model, "split_counts_"):
        raise ValueError("model is not fitted")
    return model.split_counts_.copy()


def predict(model, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels and Ponzi scores in [0, 1]; ``label == (score >= 0.5)``."""
    score = model.predict_proba(X)[:, 1]
    return (score >= 0.5).astype(int), score


__all__ = [
    "MODEL_KINDS",
    "ModelConfig",
    "make_model",
    "GBDTClassifier",
    "KNNClassifier",
    "DecisionTreeClassifier",
    "RandomForestClassifier",
    "Tree",
    "feature_importance",
    "predict",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]
