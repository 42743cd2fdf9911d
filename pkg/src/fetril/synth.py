"""Seeded synthetic embedding datasets and the joint-training ceiling.

Classes are isotropic Gaussian clusters: each class center is drawn
uniformly in a hypercube, train and test rows are center + N(0, sigma^2 I).
Geometric translation preserves Gaussian shape exactly, which keeps the
generator's mean/covariance invariants sharp on this data. Presets:
'easy' (well separated) and 'hard' (sigma comparable to inter-center
distances).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .classifier import TrainConfig, train
from .errors import ContractError
from .feature_store import (FeatureStore, ManifestEntry, l2_normalize_rows,
                            load_dataset, write_feature_file, write_manifest)

# Within-class sigma per preset, calibrated on d=64 / scale=10 clusters so
# that 'easy' keeps the NCM baseline at >= 0.95 average accuracy while leaving
# visible headroom below the joint ceiling, and 'hard' overlaps clusters
# enough that cluster geometry (not the ceiling) decides the ranking.
PRESET_SIGMA = {"easy": 13.0, "hard": 22.0}
TEST_FRACTION = 0.2


@dataclass(frozen=True)
class SynthSpec:
    num_classes: int = 20
    dim: int = 64
    samples_per_class: int = 100
    class_center_scale: float = 10.0
    within_class_sigma: float = PRESET_SIGMA["easy"]
    seed: int = 0
    name: str = "synth"

    def __post_init__(self):
        if min(self.num_classes, self.dim, self.samples_per_class) < 1:
            raise ContractError("synth spec counts must be >= 1")
        if self.within_class_sigma <= 0 or self.class_center_scale <= 0:
            raise ContractError("synth spec scales must be positive")

    @property
    def test_per_class(self) -> int:
        return max(1, int(round(self.samples_per_class * TEST_FRACTION)))


def preset_spec(preset: str, **overrides) -> SynthSpec:
    if preset not in PRESET_SIGMA:
        raise ContractError(f"unknown preset {preset!r}")
    spec = SynthSpec(within_class_sigma=PRESET_SIGMA[preset],
                     name=f"synth-{preset}")
    return replace(spec, **overrides) if overrides else spec


def generate(spec: SynthSpec, out_dir) -> tuple[Path, Path]:
    """Write per-class feature files plus train/test manifests.

    Per-class streams derive from (seed, class_id), so generation is
    deterministic and byte-identical for identical specs.

    Returns (train_manifest_path, test_manifest_path).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_entries, test_entries = [], []
    for class_id in range(spec.num_classes):
        rng = np.random.default_rng(np.random.SeedSequence(
            [spec.seed & (2**64 - 1), class_id]))
        center = rng.uniform(-spec.class_center_scale, spec.class_center_scale,
                             size=spec.dim)
        train_rows = center + rng.normal(
            0.0, spec.within_class_sigma, size=(spec.samples_per_class, spec.dim))
        test_rows = center + rng.normal(
            0.0, spec.within_class_sigma, size=(spec.test_per_class, spec.dim))
        for split, rows, entries in (("train", train_rows, train_entries),
                                     ("test", test_rows, test_entries)):
            rel = f"class_{class_id:04d}_{split}.bin"
            write_feature_file(out_dir / rel, class_id,
                               rows.astype(np.float32))
            entries.append(ManifestEntry(class_id, rows.shape[0], rel))
    train_path = out_dir / "train.json"
    test_path = out_dir / "test.json"
    write_manifest(train_path, spec.name, spec.dim, "train", train_entries)
    write_manifest(test_path, spec.name, spec.dim, "test", test_entries)
    return train_path, test_path


def generate_stores(spec: SynthSpec, out_dir) -> tuple[FeatureStore, FeatureStore]:
    train_path, test_path = generate(spec, out_dir)
    return load_dataset(train_path), load_dataset(test_path)


def joint_upper_bound(train_store: FeatureStore, test_store: FeatureStore,
                      config: TrainConfig) -> float:
    """Non-incremental ceiling: train the same classifier variant on all real
    features at once and return its test top-1."""
    features = {
        c: l2_normalize_rows(train_store.matrix(c).data)
        for c in train_store.class_ids
    }
    bank = train(features, config)
    correct = total = 0
    for c in test_store.class_ids:
        feats = l2_normalize_rows(test_store.matrix(c).data)
        preds = bank.predict(feats)
        correct += int(np.sum(preds == c))
        total += feats.shape[0]
    return correct / total
