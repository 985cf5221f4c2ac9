"""Tri-class random-forest meta-learner with leave-one-dataset-out evaluation.

Trees grow on bootstrap samples drawn with dataset-balancing instance
weights, split on a random subset of features by weighted Gini gain, and
route NOT_APPLICABLE values through a per-split default branch learned from
the majority direction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metadb import (
    FEATURE_COLUMNS,
    MetaDatabase,
    RESPONSE_CLASSES,
    exclude_dataset,
    feature_matrix,
    instance_features,
)

MODEL_SCHEMA_VERSION = 1
DEFAULT_TREES = 100
MIN_NODE_SIZE = 5


class ModelError(Exception):
    """Model persistence or schema failure."""


@dataclass(frozen=True)
class ForestModel:
    """Trained forest; trees are nested node dicts over feature columns."""

    trees: tuple[dict, ...]
    n_trees: int
    feature_ids: tuple[str, ...]
    class_order: tuple[str, ...]
    seed: int
    algorithm: str = ""
    measure: str = ""


def _gini(weighted_counts: np.ndarray) -> float:
    total = weighted_counts.sum()
    if total <= 0:
        return 0.0
    p = weighted_counts / total
    return float(1.0 - (p * p).sum())


def _leaf(y: np.ndarray, w: np.ndarray, n_classes: int) -> dict:
    counts = np.zeros(n_classes)
    np.add.at(counts, y, w)
    return {"p": (counts / counts.sum()).tolist()}


def _best_weighted_split(values, y, w, n_classes):
    """Best (gain, threshold) over midpoints of adjacent distinct values."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    lab = y[order]
    wt = w[order]
    n = v.size
    contrib = np.zeros((n, n_classes))
    contrib[np.arange(n), lab] = wt
    prefix = np.cumsum(contrib, axis=0)
    total = prefix[-1]
    w_total = total.sum()
    h_all = _gini(total)
    if h_all == 0.0:
        return None
    # weighted child impurities for every split position at once
    left = prefix[:-1]
    right = total - left
    wl = left.sum(axis=1)
    wr = right.sum(axis=1)
    children = (
        wl - (left * left).sum(axis=1) / np.maximum(wl, 1e-300)
    ) / w_total + (wr - (right * right).sum(axis=1) / np.maximum(wr, 1e-300)) / w_total
    gains = h_all - children
    valid = (v[1:] != v[:-1]) & (wl > 0) & (wr > 0)
    best = None
    for i in np.flatnonzero(valid):
        gain = gains[i]
        if gain > 1e-12 and (best is None or gain > best[0] + 1e-12):
            threshold = float((v[i] + v[i + 1]) / 2.0)
            if threshold <= v[i]:  # midpoint of adjacent floats can round down
                threshold = float(v[i + 1])
            best = (float(gain), threshold)
    return best


def _grow_tree(x, y, w, rng, n_candidates, n_classes):
    def build(idx):
        labels = y[idx]
        node = _leaf(labels, w[idx], n_classes)
        if idx.size < MIN_NODE_SIZE or np.all(labels == labels[0]):
            return node
        features = rng.choice(x.shape[1], size=n_candidates, replace=False)
        best = None  # (gain, feature, threshold)
        for f in np.sort(features):
            col = x[idx, f]
            present = ~np.isnan(col)
            if present.sum() < 2:
                continue
            cand = _best_weighted_split(
                col[present], labels[present], w[idx][present], n_classes
            )
            if cand is None:
                continue
            gain, threshold = cand
            if best is None or gain > best[0] + 1e-12:
                best = (gain, int(f), threshold)
        if best is None:
            return node
        _, f, threshold = best
        col = x[idx, f]
        missing = np.isnan(col)
        left_mask = ~missing & (col < threshold)
        right_mask = ~missing & ~left_mask
        default_left = w[idx][left_mask].sum() >= w[idx][right_mask].sum()
        if missing.any():
            if default_left:
                left_mask |= missing
            else:
                right_mask |= missing
        node = {
            "f": f,
            "t": threshold,
            "d": 0 if default_left else 1,
            "l": build(idx[left_mask]),
            "r": build(idx[right_mask]),
        }
        return node

    return build(np.arange(x.shape[0]))


def train_forest(
    db: MetaDatabase, n_trees: int = DEFAULT_TREES, *, seed: int
) -> ForestModel:
    """Train the tri-class forest on a meta-database.

    Bootstrap sampling probabilities and impurity both use the per-dataset
    weights 1/|T_d|, so every source dataset carries the same influence.
    """
    if not db.rows:
        raise ValueError("empty meta-database")
    x, y, w = feature_matrix(db)
    if np.unique(y).size < 2:
        raise ValueError("meta-database holds a single response class")
    n_rows, n_features = x.shape
    n_candidates = min(n_features, math.ceil(math.sqrt(n_features)))
    prob = w / w.sum()
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        sample = rng.choice(n_rows, size=n_rows, replace=True, p=prob)
        trees.append(
            _grow_tree(x[sample], y[sample], w[sample], rng, n_candidates, len(RESPONSE_CLASSES))
        )
    return ForestModel(
        trees=tuple(trees),
        n_trees=n_trees,
        feature_ids=FEATURE_COLUMNS,
        class_order=RESPONSE_CLASSES,
        seed=seed,
        algorithm=db.algorithm.name,
        measure=db.measure,
    )


def _tree_vote(node: dict, row: np.ndarray) -> int:
    while "f" in node:
        value = row[node["f"]]
        if math.isnan(value):
            node = node["l"] if node["d"] == 0 else node["r"]
        elif value < node["t"]:
            node = node["l"]
        else:
            node = node["r"]
    return int(np.argmax(node["p"]))  # ties resolve in class order


def predict_proba(model: ForestModel, features: np.ndarray):
    """Fraction of trees voting each class, in the model's class order."""
    row = np.asarray(features, dtype=float)
    if row.shape != (len(model.feature_ids),):
        raise ValueError(
            f"feature row has shape {row.shape}, expected ({len(model.feature_ids)},)"
        )
    votes = np.zeros(len(model.class_order))
    for tree in model.trees:
        votes[_tree_vote(tree, row)] += 1.0
    proba = votes / len(model.trees)
    return tuple(float(p) for p in proba)


def predicted_class(model: ForestModel, proba) -> str:
    return model.class_order[int(np.argmax(proba))]


@dataclass(frozen=True)
class LoovPrediction:
    transformation: str
    probabilities: tuple[float, float, float]
    predicted_class: str
    true_class: str


@dataclass(frozen=True)
class LoovFold:
    dataset_name: str
    predictions: tuple[LoovPrediction, ...]


@dataclass(frozen=True)
class LoovReport:
    per_dataset: tuple[LoovFold, ...]


def loov_evaluate(db: MetaDatabase, n_trees: int = DEFAULT_TREES, *, seed: int) -> LoovReport:
    """Leave-one-dataset-out predictions for every meta-instance.

    For each source dataset, a forest is trained on every other dataset's
    rows and scores the held-out rows; no instance of the test dataset ever
    reaches its own training fold.
    """
    names = db.dataset_names()
    if len(names) < 2:
        raise ValueError("leave-one-dataset-out needs at least two source datasets")
    folds = []
    for name in names:
        model = train_forest(exclude_dataset(db, name), n_trees, seed=seed)
        predictions = []
        for row in db.rows_of(name):
            proba = predict_proba(model, instance_features(row))
            predictions.append(
                LoovPrediction(
                    transformation=row.transformation,
                    probabilities=proba,
                    predicted_class=predicted_class(model, proba),
                    true_class=row.meta_response_class,
                )
            )
        folds.append(LoovFold(name, tuple(predictions)))
    return LoovReport(tuple(folds))


# --- persistence ----------------------------------------------------------


def save_model(model: ForestModel, path, extra: dict | None = None) -> None:
    """Write the forest as versioned JSON; floats keep full precision."""
    doc = {
        "format": "preprank-forest",
        "schema_version": MODEL_SCHEMA_VERSION,
        "n_trees": model.n_trees,
        "seed": model.seed,
        "algorithm": model.algorithm,
        "measure": model.measure,
        "class_order": list(model.class_order),
        "feature_ids": list(model.feature_ids),
        "trees": list(model.trees),
    }
    if extra:
        doc["config"] = extra
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_model(path) -> ForestModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed model file: {exc}") from exc
    if doc.get("format") != "preprank-forest":
        raise ModelError("not a forest model file")
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelError(
            f"schema_version {doc.get('schema_version')} not supported "
            f"(expected {MODEL_SCHEMA_VERSION})"
        )
    return ForestModel(
        trees=tuple(doc["trees"]),
        n_trees=int(doc["n_trees"]),
        feature_ids=tuple(doc["feature_ids"]),
        class_order=tuple(doc["class_order"]),
        seed=int(doc["seed"]),
        algorithm=doc.get("algorithm", ""),
        measure=doc.get("measure", ""),
    )
