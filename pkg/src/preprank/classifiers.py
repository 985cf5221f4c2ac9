"""Base classification algorithms and their k-fold cross-validated measures.

Four learners ship: an information-gain decision tree, Gaussian/Laplace naive
Bayes, k-nearest-neighbour with internally min-max normalized distances, and
L2-penalized multinomial logistic regression.  More can be plugged in through
:func:`register_learner`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import rankdata

from .dataset import Dataset, stratified_folds

MEASURES = ("acc", "prec", "rec", "auc")


@dataclass(frozen=True)
class ClassifierKind:
    """A base learner selector; ``k`` only matters for the ``knn`` family."""

    family: str
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def name(self) -> str:
        return f"knn:{self.k}" if self.family == "knn" else self.family


TREE = ClassifierKind("tree")
NAIVE_BAYES = ClassifierKind("nb")
LOGISTIC = ClassifierKind("logistic")


def knn(k: int = 1) -> ClassifierKind:
    return ClassifierKind("knn", k)


def parse_classifier(name: str) -> ClassifierKind:
    """Parse a canonical classifier name: ``tree``, ``nb``, ``knn:k``, ``logistic``."""
    name = name.strip()
    if name.startswith("knn"):
        _, _, rest = name.partition(":")
        return ClassifierKind("knn", int(rest) if rest else 1)
    if name not in _LEARNERS:
        raise ValueError(f"unknown classifier {name!r}")
    return ClassifierKind(name)


@dataclass(frozen=True)
class PerformanceMeasures:
    """The four classification quality measures, each in [0, 1]."""

    accuracy: float
    precision: float
    recall: float
    auc: float

    def get(self, measure: str) -> float:
        try:
            field = {"acc": "accuracy", "prec": "precision", "rec": "recall", "auc": "auc"}[
                measure
            ]
        except KeyError:
            raise ValueError(f"unknown measure {measure!r}") from None
        return getattr(self, field)


class CallCounter:
    """Counts cross-validation runs, for cost assertions."""

    def __init__(self):
        self.value = 0

    def increment(self):
        self.value += 1

    def reset(self):
        self.value = 0


#: incremented on every cross_validate call
CV_RUNS = CallCounter()


# --- decision tree --------------------------------------------------------


def _entropy_from_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _class_distribution(y: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(y, minlength=n_classes).astype(float)
    return counts / counts.sum()


def _tree_fit(train: Dataset, min_leaf: int = 2):
    x = train.rows
    y = train.class_labels
    n_classes = len(train.class_attribute.categories)
    predictors = [
        (j, train.attributes[j].is_continuous) for j in train.predictor_indices
    ]
    cat_sizes = {
        j: len(train.attributes[j].categories) for j in train.categorical_predictors
    }

    def build(idx: np.ndarray):
        labels = y[idx]
        dist = _class_distribution(labels, n_classes)
        node = {"dist": dist}
        counts = np.bincount(labels, minlength=n_classes)
        h_node = _entropy_from_counts(counts)
        if h_node == 0.0:
            return node
        best = None  # (gain, j, payload)
        for j, is_cont in predictors:
            col = x[idx, j]
            present = ~np.isnan(col)
            if present.sum() < 2 * min_leaf:
                continue
            pid = idx[present]
            vals = col[present]
            if is_cont:
                cand = _best_numeric_split(vals, y[pid], n_classes, min_leaf)
                if cand is None:
                    continue
                gain, threshold = cand
                if best is None or gain > best[0] + 1e-12:
                    best = (gain, j, ("num", threshold))
            else:
                cand = _categorical_split(vals.astype(int), y[pid], n_classes, min_leaf)
                if cand is None:
                    continue
                if best is None or cand > best[0] + 1e-12:
                    best = (cand, j, ("cat", cat_sizes[j]))
        if best is None:
            return node
        gain, j, payload = best
        col = x[idx, j]
        missing = np.isnan(col)
        if payload[0] == "num":
            threshold = payload[1]
            left_mask = ~missing & (col < threshold)
            right_mask = ~missing & ~left_mask
            default_left = left_mask.sum() >= right_mask.sum()
            if missing.any():
                if default_left:
                    left_mask |= missing
                else:
                    right_mask |= missing
            node.update(
                attr=j,
                threshold=threshold,
                default_left=bool(default_left),
                left=build(idx[left_mask]),
                right=build(idx[right_mask]),
            )
        else:
            groups = {}
            for cat in np.unique(col[~missing]).astype(int):
                groups[int(cat)] = idx[~missing & (col == cat)]
            if missing.any():
                largest = max(groups, key=lambda c: (len(groups[c]), -c))
                groups[largest] = np.concatenate([groups[largest], idx[missing]])
            node.update(attr=j, children={c: build(g) for c, g in sorted(groups.items())})
        return node

    root = build(np.arange(train.n_rows))
    return root


def _xlog2(x: np.ndarray) -> np.ndarray:
    safe = np.where(x > 0, x, 1.0)
    return x * np.log2(safe)


def _best_numeric_split(vals, labels, n_classes, min_leaf):
    order = np.argsort(vals, kind="stable")
    v = vals[order]
    lab = labels[order]
    n = v.size
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), lab] = 1.0
    prefix = np.cumsum(onehot, axis=0)
    total = prefix[-1]
    h_all = _entropy_from_counts(total)
    # weighted child entropies for every split position, from count identities
    left = prefix[:-1]
    right = total - left
    wl = np.arange(1, n, dtype=float)
    wr = n - wl
    children = (
        _xlog2(wl) - _xlog2(left).sum(axis=1) + _xlog2(wr) - _xlog2(right).sum(axis=1)
    ) / n
    gains = h_all - children
    valid = (v[1:] != v[:-1]) & (wl >= min_leaf) & (wr >= min_leaf)
    best = None
    for i in np.flatnonzero(valid):
        gain = gains[i]
        if gain > 1e-12 and (best is None or gain > best[0] + 1e-12):
            threshold = float((v[i] + v[i + 1]) / 2.0)
            if threshold <= v[i]:  # midpoint of adjacent floats can round down
                threshold = float(v[i + 1])
            best = (float(gain), threshold)
    return best


def _categorical_split(vals, labels, n_classes, min_leaf):
    cats, inverse = np.unique(vals, return_inverse=True)
    if cats.size < 2:
        return None
    counts = np.zeros((cats.size, n_classes))
    np.add.at(counts, (inverse, labels), 1.0)
    sizes = counts.sum(axis=1)
    if (sizes < min_leaf).any():
        return None
    total = counts.sum(axis=0)
    n = total.sum()
    h_all = _entropy_from_counts(total)
    children = sum(
        (sizes[c] / n) * _entropy_from_counts(counts[c]) for c in range(cats.size)
    )
    gain = h_all - children
    return gain if gain > 1e-12 else None


def _tree_predict_row(node, row):
    while "attr" in node:
        value = row[node["attr"]]
        if "children" in node:
            if math.isnan(value) or int(value) not in node["children"]:
                # unseen or missing category: answer with this node's distribution
                return node["dist"]
            node = node["children"][int(value)]
        else:
            if math.isnan(value):
                node = node["left"] if node["default_left"] else node["right"]
            elif value < node["threshold"]:
                node = node["left"]
            else:
                node = node["right"]
    return node["dist"]


def _learner_tree(kind, train, test, seed):
    root = _tree_fit(train)
    scores = np.vstack([_tree_predict_row(root, row) for row in test.rows])
    return scores


# --- naive Bayes -----------------------------------------------------------

_NB_VAR_FLOOR = 1e-9


def _learner_nb(kind, train, test, seed):
    n_classes = len(train.class_attribute.categories)
    y = train.class_labels
    counts = np.bincount(y, minlength=n_classes).astype(float)
    log_prior = np.full(n_classes, -np.inf)
    observed = counts > 0
    log_prior[observed] = np.log(counts[observed] / counts.sum())

    cont = train.continuous_predictors
    cat = train.categorical_predictors
    gauss = {}
    for j in cont:
        col = train.column(j)
        for c in range(n_classes):
            vals = col[(y == c) & ~np.isnan(col)]
            if vals.size == 0:
                continue  # factor skipped for this class
            mean = float(vals.mean())
            var = float(np.var(vals, ddof=1)) if vals.size > 1 else 0.0
            gauss[(j, c)] = (mean, max(var, _NB_VAR_FLOOR))
    tables = {}
    for j in cat:
        col = train.column(j)
        k = len(train.attributes[j].categories)
        table = np.ones((n_classes, k))  # Laplace +1
        present = ~np.isnan(col)
        np.add.at(table, (y[present], col[present].astype(int)), 1.0)
        tables[j] = np.log(table / table.sum(axis=1, keepdims=True))

    scores = np.zeros((test.n_rows, n_classes))
    for i, row in enumerate(test.rows):
        logp = log_prior.copy()
        for j in cont:
            v = row[j]
            if math.isnan(v):
                continue
            for c in range(n_classes):
                params = gauss.get((j, c))
                if params is None:
                    continue
                mean, var = params
                logp[c] += -0.5 * math.log(2.0 * math.pi * var) - (v - mean) ** 2 / (
                    2.0 * var
                )
        for j in cat:
            v = row[j]
            if math.isnan(v):
                continue
            logp += tables[j][:, int(v)]
        shifted = np.exp(logp - logp[np.isfinite(logp)].max())
        shifted[~np.isfinite(shifted)] = 0.0
        scores[i] = shifted / shifted.sum()
    return scores


# --- k nearest neighbours ----------------------------------------------------


def _learner_knn(kind, train, test, seed):
    n_classes = len(train.class_attribute.categories)
    y = train.class_labels
    k = min(kind.k, train.n_rows)
    dist2 = np.zeros((test.n_rows, train.n_rows))
    for j in train.predictor_indices:
        tr = train.column(j)
        te = test.column(j)
        if train.attributes[j].is_continuous:
            present = ~np.isnan(tr)
            vals = tr[present]
            if vals.size:
                lo, hi = vals.min(), vals.max()
                span = hi - lo
            else:
                lo, span = 0.0, 0.0
            if span > 0:
                ntr = (tr - lo) / span
                nte = (te - lo) / span
            else:
                ntr = np.where(np.isnan(tr), np.nan, 0.0)
                nte = np.where(np.isnan(te), np.nan, 0.0)
            contrib = (nte[:, None] - ntr[None, :]) ** 2
        else:
            contrib = (te[:, None] != tr[None, :]).astype(float)
        either_missing = np.isnan(te)[:, None] | np.isnan(tr)[None, :]
        contrib = np.where(either_missing, 1.0, contrib)
        dist2 += contrib
    order = np.argsort(dist2, axis=1, kind="stable")  # equal distances: lowest row first
    neighbours = order[:, :k]
    scores = np.zeros((test.n_rows, n_classes))
    for i in range(test.n_rows):
        votes = np.bincount(y[neighbours[i]], minlength=n_classes)
        scores[i] = votes / votes.sum()
    return scores


# --- logistic regression -----------------------------------------------------

_LOGISTIC_L2 = 1e-4


def _logistic_design(train: Dataset):
    """Column builders for the one-hot, imputed, standardized design matrix."""
    builders = []
    for j in train.predictor_indices:
        col = train.column(j)
        present = ~np.isnan(col)
        vals = col[present]
        if train.attributes[j].is_continuous:
            fill = float(vals.mean()) if vals.size else 0.0
            filled = np.where(present, col, fill)
            mean = float(filled.mean())
            std = float(filled.std(ddof=1)) if filled.size > 1 else 0.0
            builders.append(("num", j, fill, mean, std))
        else:
            if vals.size:
                counts = np.bincount(
                    vals.astype(int), minlength=len(train.attributes[j].categories)
                )
                fill = int(np.argmax(counts))
            else:
                fill = 0
            builders.append(("cat", j, fill, len(train.attributes[j].categories)))
    return builders


def _logistic_apply(builders, ds: Dataset) -> np.ndarray:
    cols = []
    for builder in builders:
        if builder[0] == "num":
            _, j, fill, mean, std = builder
            col = ds.column(j)
            filled = np.where(np.isnan(col), fill, col)
            cols.append((filled - mean) / std if std > 0 else np.zeros(ds.n_rows))
        else:
            _, j, fill, k = builder
            col = ds.column(j)
            filled = np.where(np.isnan(col), float(fill), col).astype(int)
            onehot = np.zeros((ds.n_rows, k))
            onehot[np.arange(ds.n_rows), filled] = 1.0
            cols.append(onehot)
    return np.column_stack([c if c.ndim == 2 else c[:, None] for c in cols])


def _learner_logistic(kind, train, test, seed):
    n_classes = len(train.class_attribute.categories)
    builders = _logistic_design(train)
    x = _logistic_apply(builders, train)
    y = train.class_labels
    n, d = x.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    def objective(flat):
        w = flat[: d * n_classes].reshape(d, n_classes)
        b = flat[d * n_classes :]
        logits = x @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        proba = exp / exp.sum(axis=1, keepdims=True)
        loss = -np.mean(np.log(np.maximum(proba[np.arange(n), y], 1e-300)))
        loss += 0.5 * _LOGISTIC_L2 * float((w * w).sum())
        grad_logits = (proba - onehot) / n
        grad_w = x.T @ grad_logits + _LOGISTIC_L2 * w
        grad_b = grad_logits.sum(axis=0)
        return loss, np.concatenate([grad_w.ravel(), grad_b])

    start = np.zeros(d * n_classes + n_classes)
    result = minimize(
        objective,
        start,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 1000, "gtol": 1e-6, "ftol": 1e-14},
    )
    w = result.x[: d * n_classes].reshape(d, n_classes)
    b = result.x[d * n_classes :]
    xt = _logistic_apply(builders, test)
    logits = xt @ w + b
    logits -= logits.max(axis=1, keepdims=True)
    exp = np.exp(logits)
    return exp / exp.sum(axis=1, keepdims=True)


# --- dispatch and cross-validation -------------------------------------------

_LEARNERS = {
    "tree": _learner_tree,
    "nb": _learner_nb,
    "knn": _learner_knn,
    "logistic": _learner_logistic,
}


def register_learner(family: str, fn) -> None:
    """Register a learner callable ``fn(kind, train, test, seed) -> scores``.

    ``scores`` must be an (n_test, n_classes) array of class scores.
    """
    _LEARNERS[family] = fn


def fit_predict(kind: ClassifierKind, train: Dataset, test: Dataset, seed: int):
    """Train on ``train`` and score ``test``; returns [(class index, scores), ...].

    The predicted class is the argmax of the score vector, ties going to the
    lowest class index.  Deterministic given the seed.
    """
    if train.attributes != test.attributes or train.class_index != test.class_index:
        raise ValueError("train and test datasets have different schemas")
    if train.n_rows == 0:
        raise ValueError("empty training split")
    learner = _LEARNERS.get(kind.family)
    if learner is None:
        raise ValueError(f"no learner registered for {kind.family!r}")
    scores = np.asarray(learner(kind, train, test, seed), dtype=float)
    preds = scores.argmax(axis=1)
    return [(int(p), scores[i]) for i, p in enumerate(preds)]


def cross_validate(
    kind: ClassifierKind, ds: Dataset, k: int = 10, *, seed: int
) -> PerformanceMeasures:
    """Stratified k-fold cross-validation with predictions pooled across folds."""
    CV_RUNS.increment()
    assignment = stratified_folds(ds, k, seed)
    folds = np.asarray(assignment.fold_of_row)
    n = ds.n_rows
    n_classes = len(ds.class_attribute.categories)
    preds = np.empty(n, dtype=int)
    scores = np.zeros((n, n_classes))
    for f in range(k):
        test_idx = np.flatnonzero(folds == f)
        train_idx = np.flatnonzero(folds != f)
        output = fit_predict(kind, ds.subset(train_idx), ds.subset(test_idx), seed)
        for row, (p, s) in zip(test_idx, output):
            preds[row] = p
            scores[row] = s
    return _pooled_measures(ds.class_labels, preds, scores)


def _pooled_measures(true, preds, scores) -> PerformanceMeasures:
    n = true.size
    n_classes = scores.shape[1]
    accuracy = float((preds == true).mean())

    # macro averages; per-class terms with an empty denominator are dropped
    recalls = []
    precisions = []
    for c in range(n_classes):
        true_c = true == c
        pred_c = preds == c
        if true_c.any():
            recalls.append(float((pred_c & true_c).sum() / true_c.sum()))
        if pred_c.any():
            precisions.append(float((pred_c & true_c).sum() / pred_c.sum()))
    recall = float(np.mean(recalls)) if recalls else 0.0
    precision = float(np.mean(precisions)) if precisions else 0.0

    # class-frequency-weighted one-vs-rest rank AUC
    aucs = []
    weights = []
    for c in range(n_classes):
        pos = true == c
        n_pos = int(pos.sum())
        if n_pos == 0 or n_pos == n:
            continue
        ranks = rankdata(scores[:, c])
        r_pos = ranks[pos].sum()
        auc_c = (r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * (n - n_pos))
        aucs.append(auc_c)
        weights.append(n_pos)
    if aucs:
        auc = float(np.average(aucs, weights=weights))
    else:
        auc = 0.5  # single observed class: ranking quality is undefined
    return PerformanceMeasures(accuracy, precision, recall, auc)
