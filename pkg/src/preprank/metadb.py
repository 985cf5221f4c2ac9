"""Build and persist the per-algorithm meta-database.

One row per (dataset, transformation): the dataset's modifiable
characteristics, their deltas under the transformation, the base
cross-validated performance, and the labeled relative impact.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .classifiers import MEASURES, ClassifierKind, cross_validate, parse_classifier
from .metafeatures import MODIFIABLE_IDS, compute_meta_features, delta
from .transforms import apply, enumerate_applicable

log = logging.getLogger("preprank.metadb")

SCHEMA_VERSION = 1

POSITIVE = "positive"
NEGATIVE = "negative"
ZERO = "zero"
RESPONSE_CLASSES = (POSITIVE, NEGATIVE, ZERO)

DEFAULT_EPSILON = 1e-9

#: training columns, in file order: base features, deltas, base performance
FEATURE_COLUMNS: tuple[str, ...] = (
    tuple(f"mf_{fid}" for fid in MODIFIABLE_IDS)
    + tuple(f"dmf_{fid}" for fid in MODIFIABLE_IDS)
    + ("base_perf",)
)


class MetaDbError(Exception):
    """Meta-database construction or serialization failure."""


def label_response(base: float, after: float, epsilon: float = DEFAULT_EPSILON):
    """Signed relative performance change and its three-way class.

    The change is relative to ``base`` when positive, absolute otherwise.
    ``zero`` means the magnitude is within ``epsilon`` (exact CV ties by
    default).
    """
    value = (after - base) / base if base > 0 else after - base
    if abs(value) <= epsilon:
        return value, ZERO
    return value, POSITIVE if value > 0 else NEGATIVE


@dataclass(frozen=True)
class MetaInstance:
    """One observed (dataset, transformation) outcome."""

    dataset_name: str
    transformation: str
    base_features: dict[str, float | None]
    delta_features: dict[str, float | None]
    base_performance: float
    meta_response_value: float
    meta_response_class: str
    measure: str


@dataclass(frozen=True)
class MetaDatabase:
    algorithm: ClassifierKind
    measure: str
    rows: tuple[MetaInstance, ...]
    schema_version: int = SCHEMA_VERSION

    def dataset_names(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.dataset_name, None)
        return tuple(seen)

    def rows_of(self, dataset_name: str) -> tuple[MetaInstance, ...]:
        return tuple(r for r in self.rows if r.dataset_name == dataset_name)

    def weights(self) -> np.ndarray:
        """Per-row weight 1/|T_d|; each source dataset sums to exactly 1."""
        counts: dict[str, int] = {}
        for row in self.rows:
            counts[row.dataset_name] = counts.get(row.dataset_name, 0) + 1
        return np.array([1.0 / counts[r.dataset_name] for r in self.rows])

    def positive_rate(self) -> float:
        """Fraction of rows whose real impact class is positive."""
        if not self.rows:
            return 0.0
        return sum(r.meta_response_class == POSITIVE for r in self.rows) / len(self.rows)


def feature_vector(
    base_features: dict[str, float | None],
    delta_features: dict[str, float | None],
    base_performance: float,
) -> np.ndarray:
    """Numeric row in FEATURE_COLUMNS order; NOT_APPLICABLE becomes NaN."""
    out = np.empty(len(FEATURE_COLUMNS))
    i = 0
    for fid in MODIFIABLE_IDS:
        v = base_features[fid]
        out[i] = np.nan if v is None else v
        i += 1
    for fid in MODIFIABLE_IDS:
        v = delta_features[fid]
        out[i] = np.nan if v is None else v
        i += 1
    out[i] = base_performance
    return out


def instance_features(instance: MetaInstance) -> np.ndarray:
    return feature_vector(
        instance.base_features, instance.delta_features, instance.base_performance
    )


def feature_matrix(db: MetaDatabase):
    """(X, y, w) for meta-learning: features, class index, dataset weights."""
    x = np.vstack([instance_features(r) for r in db.rows])
    y = np.array([RESPONSE_CLASSES.index(r.meta_response_class) for r in db.rows])
    return x, y, db.weights()


def _dataset_rows(args):
    """Worker: all meta-instances of one dataset, or a failure reason."""
    ds, algorithm, measure, seed, folds, epsilon = args
    try:
        base_mf = compute_meta_features(ds)
        base_pm = cross_validate(algorithm, ds, folds, seed=seed).get(measure)
        base_mod = base_mf.modifiable()
        rows = []
        for spec in enumerate_applicable(ds):
            transformed = apply(spec, ds)
            trans_mf = compute_meta_features(transformed.dataset)
            deltas = delta(base_mf, trans_mf).modifiable()
            trans_pm = cross_validate(algorithm, transformed.dataset, folds, seed=seed).get(
                measure
            )
            value, cls = label_response(base_pm, trans_pm, epsilon)
            rows.append(
                MetaInstance(
                    dataset_name=ds.name,
                    transformation=spec.text,
                    base_features=base_mod,
                    delta_features=deltas,
                    base_performance=base_pm,
                    meta_response_value=value,
                    meta_response_class=cls,
                    measure=measure,
                )
            )
        return ds.name, rows, None
    except Exception as exc:  # noqa: BLE001 - per-dataset failures are reported, not fatal
        return ds.name, None, f"{type(exc).__name__}: {exc}"


def build_metadb(
    datasets,
    algorithm: ClassifierKind,
    measure: str,
    seed: int,
    *,
    folds: int = 10,
    epsilon: float = DEFAULT_EPSILON,
    jobs: int = 1,
) -> MetaDatabase:
    """Measure every applicable transformation on every dataset.

    Datasets where any step fails are skipped with a logged reason; the
    result covers the survivors in corpus order.
    """
    datasets = list(datasets)
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    if not datasets:
        raise ValueError("empty corpus")
    tasks = [(ds, algorithm, measure, seed, folds, epsilon) for ds in datasets]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_dataset_rows, tasks))
    else:
        results = [_dataset_rows(t) for t in tasks]
    rows: list[MetaInstance] = []
    survivors = 0
    for name, ds_rows, reason in results:
        if ds_rows is None:
            log.warning("skipping dataset %s: %s", name, reason)
            continue
        survivors += 1
        rows.extend(ds_rows)
    if survivors == 0:
        raise MetaDbError("all datasets failed")
    return MetaDatabase(algorithm, measure, tuple(rows))


# --- persistence ----------------------------------------------------------

_PROVENANCE_COLUMNS = ("dataset", "transformation")
_TRAILING_COLUMNS = ("base_perf", "response_value", "response_class")


def _format(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def save(db: MetaDatabase, path, header_comment: str | None = None) -> None:
    """Write tab-delimited text: a schema comment, a header, one line per row."""
    header = (
        _PROVENANCE_COLUMNS
        + tuple(f"mf_{fid}" for fid in MODIFIABLE_IDS)
        + tuple(f"dmf_{fid}" for fid in MODIFIABLE_IDS)
        + _TRAILING_COLUMNS
    )
    lines = [
        f"# preprank-metadb schema_version={db.schema_version} "
        f"algorithm={db.algorithm.name} measure={db.measure}",
        "\t".join(header),
    ]
    if header_comment:
        lines.insert(1, f"# {header_comment.lstrip('# ')}")
    for row in db.rows:
        cells = [row.dataset_name, row.transformation]
        cells += [_format(row.base_features[fid]) for fid in MODIFIABLE_IDS]
        cells += [_format(row.delta_features[fid]) for fid in MODIFIABLE_IDS]
        cells += [
            repr(float(row.base_performance)),
            repr(float(row.meta_response_value)),
            row.meta_response_class,
        ]
        lines.append("\t".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load(path) -> MetaDatabase:
    """Inverse of :func:`save`; rejects unknown schema versions."""
    text = Path(path).read_text(encoding="utf-8")
    meta: dict[str, str] = {}
    header = None
    rows: list[MetaInstance] = []
    n_features = len(MODIFIABLE_IDS)
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            if "preprank-metadb" in line:
                for token in line.lstrip("# ").split():
                    if "=" in token:
                        key, value = token.split("=", 1)
                        meta[key] = value
            continue
        if header is None:
            header = line.split("\t")
            expected = (
                _PROVENANCE_COLUMNS
                + tuple(f"mf_{fid}" for fid in MODIFIABLE_IDS)
                + tuple(f"dmf_{fid}" for fid in MODIFIABLE_IDS)
                + _TRAILING_COLUMNS
            )
            if tuple(header) != expected:
                raise MetaDbError("unexpected column header")
            continue
        cells = line.split("\t")
        if len(cells) != len(header):
            raise MetaDbError(f"row with {len(cells)} cells, expected {len(header)}")
        base = {
            fid: (float(cells[2 + i]) if cells[2 + i] != "" else None)
            for i, fid in enumerate(MODIFIABLE_IDS)
        }
        deltas = {
            fid: (
                float(cells[2 + n_features + i])
                if cells[2 + n_features + i] != ""
                else None
            )
            for i, fid in enumerate(MODIFIABLE_IDS)
        }
        cls = cells[-1]
        if cls not in RESPONSE_CLASSES:
            raise MetaDbError(f"unknown response class {cls!r}")
        rows.append(
            MetaInstance(
                dataset_name=cells[0],
                transformation=cells[1],
                base_features=base,
                delta_features=deltas,
                base_performance=float(cells[-3]),
                meta_response_value=float(cells[-2]),
                meta_response_class=cls,
                measure=meta.get("measure", ""),
            )
        )
    if "schema_version" not in meta or "algorithm" not in meta or "measure" not in meta:
        raise MetaDbError("missing metadata comment line")
    version = int(meta["schema_version"])
    if version != SCHEMA_VERSION:
        raise MetaDbError(
            f"schema_version {version} not supported (expected {SCHEMA_VERSION})"
        )
    if meta["measure"] not in MEASURES:
        raise MetaDbError(f"unknown measure {meta['measure']!r}")
    if header is None or not rows:
        raise MetaDbError("file holds no meta-instances")
    return MetaDatabase(
        algorithm=parse_classifier(meta["algorithm"]),
        measure=meta["measure"],
        rows=tuple(rows),
        schema_version=version,
    )


def exclude_dataset(db: MetaDatabase, dataset_name: str) -> MetaDatabase:
    """The database minus every row of one source dataset."""
    return replace(db, rows=tuple(r for r in db.rows if r.dataset_name != dataset_name))
