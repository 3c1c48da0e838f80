"""Versioned JSON dump and reload of fitted models."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gbdt import GBDTClassifier
from .knn import KNNClassifier
from .tree import DecisionTreeClassifier, RandomForestClassifier, Tree

FORMAT = "ponzitrace-model"
VERSION = 1

_KINDS = {
    "knn": KNNClassifier,
    "cart": DecisionTreeClassifier,
    "random_forest": RandomForestClassifier,
    "gbdt": GBDTClassifier,
}


def _kind_of(model) -> str:
    for kind, cls in _KINDS.items():
        if type(model) is cls:
            return kind
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_to_dict(model, feature_names=None) -> dict:
    kind = _kind_of(model)
    state: dict = {"n_features_in": int(model.n_features_in_)}
    if kind == "knn":
        state.update(
            mean=model.mean_.tolist(),
            scale=model.scale_.tolist(),
            train_X=model.train_X_.tolist(),
            train_y=model.train_y_.tolist(),
        )
    elif kind == "cart":
        state["trees"] = [model.tree_.to_dict()]
    else:
        state["trees"] = [t.to_dict() for t in model.estimators_]
    if kind == "gbdt":
        state["init_score"] = model.init_score_
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "params": model.get_params(),
        "feature_names": list(feature_names) if feature_names is not None else None,
        "state": state,
    }


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise ValueError("not a serialized ponzitrace model")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    kind = d["kind"]
    model = _KINDS[kind](**d["params"])
    st = d["state"]
    model.n_features_in_ = st["n_features_in"]
    model.classes_ = np.array([0, 1])
    if kind == "knn":
        model.mean_ = np.array(st["mean"], dtype=float)
        model.scale_ = np.array(st["scale"], dtype=float)
        model.train_X_ = np.array(st["train_X"], dtype=float).reshape(-1, model.n_features_in_)
        model.train_y_ = np.array(st["train_y"], dtype=int)
        return model
    trees = [Tree.from_dict(t) for t in st["trees"]]
    if kind == "cart":
        model.tree_ = trees[0]
    else:
        model.estimators_ = trees
    if kind == "gbdt":
        model.init_score_ = float(st["init_score"])
    feats = np.concatenate([t.feature[t.feature >= 0] for t in trees])
    model.split_counts_ = np.bincount(feats, minlength=model.n_features_in_)
    return model


def save_model(model, path, feature_names=None) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, feature_names)) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
