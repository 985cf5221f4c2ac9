"""Production-time recommendation: prune by expert rules, score, rank.

Ranking a dataset runs the target classifier exactly once (for the base
performance); every candidate transformation is then judged from its
meta-feature deltas alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .classifiers import ClassifierKind, cross_validate
from .dataset import Dataset
from .forest import ForestModel, predict_proba
from .metadb import feature_vector
from .metafeatures import compute_meta_features, delta
from .transforms import (
    KIND_ORDER,
    NORMALIZE,
    STANDARDIZE,
    TransformationSpec,
    apply,
    enumerate_applicable,
)

EXCLUDE = "exclude"
ANY_ALGORITHM = "any"


class RulesError(Exception):
    """Unparsable expert-rules text."""


@dataclass(frozen=True)
class ExpertRule:
    """Declarative filter: exclude one transformation kind for one algorithm family."""

    algorithm: str
    transformation_kind: str
    action: str = EXCLUDE
    note: str = ""

    def __post_init__(self):
        if self.action != EXCLUDE:
            raise ValueError(f"unsupported rule action {self.action!r}")
        if self.transformation_kind not in KIND_ORDER:
            raise ValueError(f"unknown transformation kind {self.transformation_kind!r}")

    def matches(self, algorithm: ClassifierKind, spec: TransformationSpec) -> bool:
        if self.transformation_kind != spec.kind:
            return False
        return self.algorithm in (ANY_ALGORITHM, algorithm.family)


#: shipped defaults: scaling operators cannot change these learners' decisions
DEFAULT_RULES: tuple[ExpertRule, ...] = tuple(
    ExpertRule(family, kind, note="scaling does not change this learner's decisions")
    for family in ("knn", "logistic", "tree")
    for kind in (NORMALIZE, STANDARDIZE)
)


def prune(
    rules, algorithm: ClassifierKind, candidates: list[TransformationSpec]
) -> list[TransformationSpec]:
    """Drop candidates matched by any rule; order is preserved."""
    return [
        spec
        for spec in candidates
        if not any(rule.matches(algorithm, spec) for rule in rules)
    ]


def parse_rules(text: str) -> tuple[ExpertRule, ...]:
    """Parse a rules file: ``exclude <algorithm|any> <transformation-kind> # note``."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line, _, comment = raw.partition("#")
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != EXCLUDE:
            raise RulesError(f"line {lineno}: expected 'exclude <algorithm|any> <kind>'")
        try:
            rules.append(ExpertRule(parts[1], parts[2], note=comment.strip()))
        except ValueError as exc:
            raise RulesError(f"line {lineno}: {exc}") from exc
    return tuple(rules)


def format_rules(rules) -> str:
    lines = [
        f"{r.action} {r.algorithm} {r.transformation_kind}"
        + (f"  # {r.note}" if r.note else "")
        for r in rules
    ]
    return "\n".join(lines) + "\n"


def load_rules(path) -> tuple[ExpertRule, ...]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class Recommendation:
    spec: TransformationSpec
    p_positive: float
    p_negative: float
    p_zero: float
    predicted_class: str
    rank: int


def rank_transformations(
    model: ForestModel,
    rules,
    algorithm: ClassifierKind,
    ds: Dataset,
    seed: int,
    *,
    folds: int = 10,
) -> list[Recommendation]:
    """Rank the applicable transformations by predicted probability of helping.

    Sorted by p_positive descending, ties broken by canonical spec text.
    Returns an empty list when pruning leaves no candidate.
    """
    if model.algorithm and model.algorithm != algorithm.name:
        raise ValueError(
            f"model was trained for {model.algorithm!r}, not {algorithm.name!r}"
        )
    base_mf = compute_meta_features(ds)
    base_pm = cross_validate(algorithm, ds, folds, seed=seed).get(model.measure or "acc")
    base_mod = base_mf.modifiable()
    candidates = prune(rules, algorithm, enumerate_applicable(ds))
    scored = []
    for spec in candidates:
        transformed = apply(spec, ds)
        trans_mf = compute_meta_features(transformed.dataset)
        deltas = delta(base_mf, trans_mf).modifiable()
        proba = predict_proba(model, feature_vector(base_mod, deltas, base_pm))
        scored.append((spec, proba))
    scored.sort(key=lambda item: (-item[1][0], item[0].text))
    out = []
    for rank, (spec, proba) in enumerate(scored, start=1):
        winner = min(range(3), key=lambda i: (-proba[i], i))
        out.append(
            Recommendation(
                spec=spec,
                p_positive=proba[0],
                p_negative=proba[1],
                p_zero=proba[2],
                predicted_class=model.class_order[winner],
                rank=rank,
            )
        )
    return out
