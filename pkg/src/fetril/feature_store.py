"""On-disk embedding format, dataset manifests and class prototypes.

Feature files are little-endian binary: the magic bytes ``FTRL1`` followed by
three u32 fields (class_id, rows, dim) and rows*dim float32 values in
row-major order. A dataset is described by a JSON manifest::

    {"name": ..., "dim": ..., "split": "train"|"test",
     "classes": [{"class_id": ..., "count": ..., "path": ...}, ...]}

Paths in the manifest are resolved relative to the manifest file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, ContractError, DataError, FormatError

FEATURE_MAGIC = b"FTRL1"
BANK_MAGIC = b"FTRLW"
_HEADER = struct.Struct("<III")

# Norms at or below this are treated as zero vectors when normalizing.
NORM_EPS = 1e-12


@dataclass(frozen=True)
class FeatureMatrix:
    """All stored features of one class: a (rows, dim) float32 array."""

    class_id: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise ContractError(
                f"class {self.class_id}: feature matrix must be 2-D with >=1 row, "
                f"got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise DataError(f"class {self.class_id}: non-finite feature values")
        self.data.setflags(write=False)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ClassPrototype:
    """Per-class centroid, stored permanently once the class is first seen."""

    class_id: int
    centroid: np.ndarray
    state_first_seen: int = 0

    def __post_init__(self):
        self.centroid.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.centroid.shape[0]


@dataclass(frozen=True)
class ManifestEntry:
    class_id: int
    count: int
    path: str


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    dim: int
    split: str
    classes: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def class_ids(self) -> list[int]:
        return [e.class_id for e in self.classes]

    @property
    def per_class_counts(self) -> dict[int, int]:
        return {e.class_id: e.count for e in self.classes}

    def path_for(self, class_id: int) -> Path:
        for e in self.classes:
            if e.class_id == class_id:
                return self.root / e.path
        raise ContractError(f"class {class_id} not in manifest '{self.name}'")


def write_feature_file(path, class_id: int, data: np.ndarray) -> None:
    """Write one class's features in the binary feature format."""
    data = np.ascontiguousarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ContractError(f"feature data must be 2-D, got shape {data.shape}")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(_HEADER.pack(class_id, data.shape[0], data.shape[1]))
        fh.write(data.tobytes())


def read_feature_header(path) -> tuple[int, int, int]:
    """Return (class_id, rows, dim) without loading the data payload."""
    with open(path, "rb") as fh:
        magic = fh.read(len(FEATURE_MAGIC))
        if magic != FEATURE_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        return _HEADER.unpack(raw)


def read_feature_file(path) -> FeatureMatrix:
    """Load and validate one feature file."""
    class_id, rows, dim = read_feature_header(path)
    if rows < 1 or dim < 1:
        raise FormatError(f"{path}: invalid shape {rows}x{dim}")
    offset = len(FEATURE_MAGIC) + _HEADER.size
    with open(path, "rb") as fh:
        fh.seek(offset)
        payload = fh.read()
    expected = rows * dim * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dim)
    return FeatureMatrix(class_id=class_id, data=data)


def load_manifest(manifest_path) -> DatasetManifest:
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FormatError(f"manifest not found: {manifest_path}")
    try:
        doc = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    for key in ("name", "dim", "split", "classes"):
        if key not in doc:
            raise FormatError(f"{manifest_path}: missing key '{key}'")
    entries = []
    for item in doc["classes"]:
        try:
            entries.append(ManifestEntry(int(item["class_id"]), int(item["count"]),
                                         str(item["path"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{manifest_path}: bad class entry {item!r}") from exc
    ids = [e.class_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ConsistencyError(f"{manifest_path}: duplicate class ids")
    return DatasetManifest(name=str(doc["name"]), dim=int(doc["dim"]),
                           split=str(doc["split"]), classes=entries,
                           root=manifest_path.parent)


def write_manifest(manifest_path, name: str, dim: int, split: str,
                   entries: list[ManifestEntry]) -> None:
    doc = {
        "name": name,
        "dim": dim,
        "split": split,
        "classes": [
            {"class_id": e.class_id, "count": e.count, "path": e.path}
            for e in entries
        ],
    }
    Path(manifest_path).write_text(json.dumps(doc, indent=2) + "\n")


class FeatureStore:
    """Serves per-class feature matrices for one dataset split.

    Matrices are immutable once loaded; the store itself only caches the
    validated manifest, so concurrent readers are safe.
    """

    def __init__(self, manifest: DatasetManifest):
        self.manifest = manifest

    @property
    def dim(self) -> int:
        return self.manifest.dim

    @property
    def class_ids(self) -> list[int]:
        return self.manifest.class_ids

    def matrix(self, class_id: int) -> FeatureMatrix:
        m = read_feature_file(self.manifest.path_for(class_id))
        if m.class_id != class_id:
            raise ConsistencyError(
                f"file for class {class_id} declares class_id {m.class_id}")
        if m.dim != self.manifest.dim:
            raise ConsistencyError(
                f"class {class_id}: file dim {m.dim} != manifest dim {self.manifest.dim}")
        return m


def load_dataset(manifest_path) -> FeatureStore:
    """Load a manifest and validate every referenced feature file header."""
    manifest = load_manifest(manifest_path)
    for entry in manifest.classes:
        path = manifest.root / entry.path
        if not path.exists():
            raise FormatError(f"feature file not found: {path}")
        class_id, rows, dim = read_feature_header(path)
        if class_id != entry.class_id:
            raise ConsistencyError(
                f"{path}: header class_id {class_id} != manifest {entry.class_id}")
        if rows != entry.count:
            raise ConsistencyError(
                f"{path}: header rows {rows} != manifest count {entry.count}")
        if dim != manifest.dim:
            raise ConsistencyError(
                f"{path}: header dim {dim} != manifest dim {manifest.dim}")
    return FeatureStore(manifest)


def compute_prototype(m: FeatureMatrix, state_first_seen: int = 0) -> ClassPrototype:
    """Arithmetic mean of the class features, accumulated in float64."""
    centroid = m.data.astype(np.float64).mean(axis=0)
    return ClassPrototype(class_id=m.class_id, centroid=centroid,
                          state_first_seen=state_first_seen)


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit norm; vectors with norm <= eps map to zero."""
    v = np.asarray(v, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm <= NORM_EPS:
        return np.zeros_like(v)
    return v / norm


def l2_normalize_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise l2 normalization with the same zero-vector convention."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    out = np.divide(m, norms, out=np.zeros_like(m), where=norms > NORM_EPS)
    return out
