"""Pseudo-feature generation for past classes.

A pseudo-feature is a real feature of a new class shifted by the difference
between the target past-class centroid and the source-class centroid:

    pseudo = feature + centroid(target) - centroid(source)

The shift is rigid, so the pseudo-feature set inherits the source sample
distribution, relocated around the target centroid. Three source-selection
strategies are supported: the k-th most similar new class (cosine between
centroids), uniform random over the pooled new-class rows, and herding over
the translated pool.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ContractError, GeometryError, ProtocolError
from .feature_store import ClassPrototype
from .herding import herd

STRATEGY_KINDS = ("kth_similar", "random", "herding")


@dataclass(frozen=True)
class SelectionStrategy:
    """How source features are picked for one past class.

    kind: 'kth_similar' (use the class at cosine-similarity rank k),
    'random' (uniform over all pooled new-class rows) or 'herding'.
    ``seed`` feeds the random strategy; each past class derives its own
    stream from (seed, class_id) so parallel generation is order-free.
    ``with_replacement`` forces replacement even when the pool suffices;
    an undersized pool always falls back to replacement.
    """

    kind: str = "kth_similar"
    k: int = 1
    seed: int = 0
    with_replacement: bool = False

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ContractError(f"unknown strategy kind {self.kind!r}")
        if self.k < 1:
            raise ContractError(f"strategy rank k must be >= 1, got {self.k}")

    @property
    def label(self) -> str:
        return f"k:{self.k}" if self.kind == "kth_similar" else self.kind


def parse_strategy(text: str, seed: int = 0,
                   with_replacement: bool = False) -> SelectionStrategy:
    """Parse a CLI strategy spec: 'k:<int>', 'random' or 'herding'."""
    text = text.strip().lower()
    if text in ("random", "herding"):
        return SelectionStrategy(kind=text, seed=seed,
                                 with_replacement=with_replacement)
    if text.startswith("k:"):
        try:
            k = int(text[2:])
        except ValueError:
            raise ContractError(f"bad strategy rank in {text!r}") from None
        return SelectionStrategy(kind="kth_similar", k=k, seed=seed,
                                 with_replacement=with_replacement)
    raise ContractError(f"unknown strategy {text!r} (expected k:<int>, random, herding)")


@dataclass(frozen=True)
class PseudoFeatureSet:
    """s pseudo-features for one past class plus their source records.

    source_record[i] = (source_class, source_row) of the feature that was
    translated into row i; re-applying the translation to those sources
    reproduces ``features`` bit-exactly.
    """

    target_class: int
    features: np.ndarray
    source_record: np.ndarray

    def __post_init__(self):
        self.features.setflags(write=False)
        self.source_record.setflags(write=False)


def translate(feature, target: ClassPrototype, source: ClassPrototype) -> np.ndarray:
    """Shift feature(s) from the source-class region to the target's.

    Accepts a single d-vector or an (n, d) matrix; output[j] =
    feature[j] + target.centroid[j] - source.centroid[j].
    """
    feature = np.asarray(feature, dtype=np.float64)
    d = feature.shape[-1]
    if target.dim != d or source.dim != d:
        raise ContractError(
            f"translate: dim mismatch (feature {d}, target {target.dim}, "
            f"source {source.dim})")
    return (feature + target.centroid) - source.centroid


def rank_new_classes(target: ClassPrototype,
                     new_protos: list[ClassPrototype]) -> list[int]:
    """New class ids by descending cosine similarity to the target centroid.

    Ties break by ascending class id. Zero-norm centroids are degenerate for
    cosine and rejected.
    """
    if not new_protos:
        raise ProtocolError("rank_new_classes: no new classes")
    t_norm = float(np.linalg.norm(target.centroid))
    if t_norm == 0.0:
        raise GeometryError(f"class {target.class_id}: zero-norm centroid")
    scored = []
    for proto in new_protos:
        norm = float(np.linalg.norm(proto.centroid))
        if norm == 0.0:
            raise GeometryError(f"class {proto.class_id}: zero-norm centroid")
        cos = float(target.centroid @ proto.centroid) / (t_norm * norm)
        scored.append((-cos, proto.class_id))
    scored.sort()
    return [class_id for _, class_id in scored]


def _rng_for(seed: int, class_id: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, class_id]))


def _pooled_rows(new_features: Mapping[int, np.ndarray]):
    """Concatenate new-class rows in ascending class-id order."""
    blocks, sources = [], []
    for class_id in sorted(new_features):
        rows = np.asarray(new_features[class_id])
        blocks.append(rows)
        sources.append(np.column_stack([
            np.full(rows.shape[0], class_id, dtype=np.int64),
            np.arange(rows.shape[0], dtype=np.int64),
        ]))
    return np.vstack(blocks), np.vstack(sources)


def _translate_by_source(new_features, protos, target, sources) -> np.ndarray:
    """Translate the (class, row) pairs in ``sources`` toward the target."""
    out = np.empty((sources.shape[0], target.dim), dtype=np.float64)
    for class_id in np.unique(sources[:, 0]):
        mask = sources[:, 0] == class_id
        rows = np.asarray(new_features[int(class_id)])[sources[mask, 1]]
        out[mask] = translate(rows, target, protos[int(class_id)])
    return out


def generate_for_past_class(target: ClassPrototype,
                            new_features: Mapping[int, np.ndarray],
                            new_protos: Mapping[int, ClassPrototype],
                            strategy: SelectionStrategy,
                            s: int) -> PseudoFeatureSet:
    """Produce exactly s pseudo-features for one past class.

    kth_similar clamps k to the number of available new classes and cycles
    deterministically through the source rows when the class is undersized.
    random draws from the pooled rows without replacement when the pool
    suffices. herding runs greedy selection over the translated pool so the
    selection directly targets the past-class centroid.
    """
    if s < 1:
        raise ContractError(f"samples-per-class budget must be >= 1, got {s}")
    if not new_features:
        raise ProtocolError(
            f"class {target.class_id}: no new classes to translate from")
    missing = set(new_features) - set(new_protos)
    if missing:
        raise ContractError(f"missing prototypes for new classes {sorted(missing)}")

    if strategy.kind == "kth_similar":
        ranked = rank_new_classes(target, [new_protos[c] for c in sorted(new_features)])
        source_class = ranked[min(strategy.k, len(ranked)) - 1]
        rows = np.asarray(new_features[source_class])
        row_idx = np.arange(s, dtype=np.int64) % rows.shape[0]
        sources = np.column_stack([
            np.full(s, source_class, dtype=np.int64), row_idx])
        features = translate(rows[row_idx], target, new_protos[source_class])
    elif strategy.kind == "random":
        _, pool_sources = _pooled_rows(new_features)
        pool_size = pool_sources.shape[0]
        rng = _rng_for(strategy.seed, target.class_id)
        replace = strategy.with_replacement or pool_size < s
        chosen = rng.choice(pool_size, size=s, replace=replace)
        sources = pool_sources[chosen]
        features = _translate_by_source(new_features, new_protos, target, sources)
    else:  # herding
        pool, pool_sources = _pooled_rows(new_features)
        translated = np.empty_like(pool, dtype=np.float64)
        offset = 0
        for class_id in sorted(new_features):
            rows = np.asarray(new_features[class_id])
            translated[offset:offset + rows.shape[0]] = translate(
                rows, target, new_protos[class_id])
            offset += rows.shape[0]
        result = herd(translated, target.centroid, s)
        sources = pool_sources[result.selected_indices]
        features = translated[result.selected_indices].copy()

    return PseudoFeatureSet(target_class=target.class_id, features=features,
                            source_record=sources)
