"""Seeded generators for small synthetic classification datasets.

Used for the bundled offline mini-corpus and for randomized tests.  Values
are full-precision floats, which keeps exact ties between distinct cells
vanishingly unlikely.
"""

from __future__ import annotations

import numpy as np

from .dataset import CATEGORICAL, CONTINUOUS, Attribute, Dataset


def random_dataset(
    seed: int,
    *,
    n_rows: int = 60,
    n_continuous: int = 3,
    n_categorical: int = 2,
    n_classes: int = 2,
    missing_rate: float = 0.0,
    class_sep: float = 1.5,
    name: str | None = None,
) -> Dataset:
    """Class-conditional Gaussian/multinomial dataset with optional missing cells."""
    if n_continuous + n_categorical < 1:
        raise ValueError("need at least one predictor")
    if n_rows < 2 * n_classes:
        raise ValueError("need at least two rows per class")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, n_classes, size=n_rows)
    # guarantee every class appears at least twice
    labels[: 2 * n_classes] = np.repeat(np.arange(n_classes), 2)

    attrs: list[Attribute] = []
    cols: list[np.ndarray] = []
    for j in range(n_continuous):
        centers = rng.normal(0.0, class_sep, size=n_classes)
        scale = rng.uniform(0.5, 2.5)
        offset = rng.normal(0.0, 3.0)
        col = offset + centers[labels] + rng.normal(0.0, scale, size=n_rows)
        attrs.append(Attribute(f"num{j}", CONTINUOUS))
        cols.append(col)
    for j in range(n_categorical):
        k = int(rng.integers(2, 5))
        weights = rng.dirichlet(np.ones(k), size=n_classes)
        col = np.array([rng.choice(k, p=weights[lab]) for lab in labels], dtype=float)
        attrs.append(Attribute(f"cat{j}", CATEGORICAL, tuple(f"v{i}" for i in range(k))))
        cols.append(col)
    if missing_rate > 0:
        for col in cols:
            mask = rng.random(n_rows) < missing_rate
            # keep at least two observed cells per column
            if mask.sum() > n_rows - 2:
                mask[np.argsort(mask)[: 2]] = False
            col[mask] = np.nan
    attrs.append(
        Attribute("class", CATEGORICAL, tuple(f"c{i}" for i in range(n_classes)))
    )
    cols.append(labels.astype(float))
    rows = np.column_stack(cols)
    return Dataset(name or f"synthetic{seed}", tuple(attrs), len(attrs) - 1, rows)


_MINI_CORPUS_SHAPES = [
    # single continuous predictor: few applicable transformations
    dict(n_rows=40, n_continuous=1, n_categorical=0, n_classes=2),
    dict(n_rows=50, n_continuous=1, n_categorical=0, n_classes=2),
    dict(n_rows=60, n_continuous=1, n_categorical=0, n_classes=3),
    dict(n_rows=45, n_continuous=1, n_categorical=0, n_classes=2),
    # continuous-only
    dict(n_rows=60, n_continuous=3, n_categorical=0, n_classes=2),
    dict(n_rows=80, n_continuous=4, n_categorical=0, n_classes=2),
    dict(n_rows=50, n_continuous=2, n_categorical=0, n_classes=3),
    dict(n_rows=70, n_continuous=5, n_categorical=0, n_classes=2),
    dict(n_rows=90, n_continuous=3, n_categorical=0, n_classes=3),
    dict(n_rows=40, n_continuous=2, n_categorical=0, n_classes=2),
    dict(n_rows=100, n_continuous=4, n_categorical=0, n_classes=2),
    dict(n_rows=60, n_continuous=6, n_categorical=0, n_classes=2),
    # mixed
    dict(n_rows=60, n_continuous=2, n_categorical=2, n_classes=2),
    dict(n_rows=80, n_continuous=3, n_categorical=1, n_classes=2),
    dict(n_rows=50, n_continuous=2, n_categorical=3, n_classes=3),
    dict(n_rows=70, n_continuous=4, n_categorical=2, n_classes=2),
    dict(n_rows=90, n_continuous=1, n_categorical=2, n_classes=2),
    dict(n_rows=60, n_continuous=3, n_categorical=2, n_classes=3),
    # mixed with missing cells
    dict(n_rows=60, n_continuous=2, n_categorical=2, n_classes=2, missing_rate=0.08),
    dict(n_rows=80, n_continuous=3, n_categorical=1, n_classes=2, missing_rate=0.05),
    dict(n_rows=50, n_continuous=2, n_categorical=2, n_classes=3, missing_rate=0.1),
    dict(n_rows=70, n_continuous=3, n_categorical=3, n_classes=2, missing_rate=0.05),
    # categorical-only
    dict(n_rows=60, n_continuous=0, n_categorical=3, n_classes=2),
    dict(n_rows=50, n_continuous=0, n_categorical=4, n_classes=3),
]


def mini_corpus(seed: int = 7) -> list[Dataset]:
    """The bundled 24-dataset desk-scale corpus, as in-memory datasets."""
    return [
        random_dataset(seed + 101 * i, name=f"syn{i:02d}", **shape)
        for i, shape in enumerate(_MINI_CORPUS_SHAPES)
    ]
