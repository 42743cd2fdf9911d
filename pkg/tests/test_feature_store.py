import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fetril.errors import (ConsistencyError, ContractError, DataError,
                           FormatError)
from fetril.feature_store import (FeatureMatrix, compute_prototype,
                                  l2_normalize, l2_normalize_rows,
                                  load_dataset, read_feature_file,
                                  write_feature_file, write_manifest,
                                  ManifestEntry)


def make_dataset(tmp_path, counts, dim=4, seed=0, split="train"):
    rng = np.random.default_rng(seed)
    entries = []
    for class_id, count in enumerate(counts):
        rel = f"c{class_id}.bin"
        write_feature_file(tmp_path / rel, class_id,
                           rng.normal(size=(count, dim)).astype(np.float32))
        entries.append(ManifestEntry(class_id, count, rel))
    manifest = tmp_path / f"{split}.json"
    write_manifest(manifest, "unit", dim, split, entries)
    return manifest


def test_load_dataset_shapes(tmp_path):
    manifest = make_dataset(tmp_path, [5, 5, 5], dim=4)
    store = load_dataset(manifest)
    assert store.manifest.num_classes == 3
    assert store.dim == 4
    for c in store.class_ids:
        m = store.matrix(c)
        assert m.data.shape == (5, 4)
        assert m.class_id == c


def test_dim_mismatch_rejected(tmp_path):
    manifest = make_dataset(tmp_path, [3, 3], dim=4)
    # rewrite one file with d=8 while the manifest says d=4
    write_feature_file(tmp_path / "c1.bin", 1,
                       np.zeros((3, 8), dtype=np.float32))
    with pytest.raises(ConsistencyError):
        load_dataset(manifest)


def test_malformed_header_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE!" + b"\x00" * 12)
    with pytest.raises(FormatError):
        read_feature_file(path)


def test_truncated_payload_rejected(tmp_path):
    path = tmp_path / "short.bin"
    write_feature_file(path, 0, np.ones((4, 3), dtype=np.float32))
    raw = path.read_bytes()
    path.write_bytes(raw[:-5])
    with pytest.raises(FormatError):
        read_feature_file(path)


def test_non_finite_rejected(tmp_path):
    path = tmp_path / "nan.bin"
    data = np.ones((2, 2), dtype=np.float32)
    data[1, 1] = np.nan
    write_feature_file(path, 0, data)
    with pytest.raises(DataError):
        read_feature_file(path)


def test_missing_file_and_count_mismatch(tmp_path):
    manifest = make_dataset(tmp_path, [2, 2])
    doc = json.loads(manifest.read_text())
    doc["classes"][0]["count"] = 99
    manifest.write_text(json.dumps(doc))
    with pytest.raises(ConsistencyError):
        load_dataset(manifest)
    (tmp_path / "c1.bin").unlink()
    doc["classes"][0]["count"] = 2
    manifest.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_dataset(manifest)


def test_round_trip_bytes(tmp_path):
    rng = np.random.default_rng(42)
    src = tmp_path / "orig.bin"
    write_feature_file(src, 17, rng.normal(size=(9, 6)).astype(np.float32))
    loaded = read_feature_file(src)
    dst = tmp_path / "copy.bin"
    write_feature_file(dst, loaded.class_id, loaded.data)
    assert src.read_bytes() == dst.read_bytes()


def test_prototype_two_point_mean():
    m = FeatureMatrix(0, np.array([[1.0, 0.0], [3.0, 0.0]], dtype=np.float32))
    assert np.array_equal(compute_prototype(m).centroid, [2.0, 0.0])


def test_prototype_single_row_identity():
    v = np.array([[0.5, -1.5, 2.0]], dtype=np.float32)
    proto = compute_prototype(FeatureMatrix(3, v))
    assert np.allclose(proto.centroid, v[0], atol=0)


def test_prototype_matches_accumulation_oracle():
    rng = np.random.default_rng(11)
    data = rng.normal(size=(100, 8)).astype(np.float32)
    proto = compute_prototype(FeatureMatrix(1, data))
    # independent double-precision accumulation, one row at a time
    acc = np.zeros(8, dtype=np.float64)
    for row in data:
        acc += row.astype(np.float64)
    assert np.allclose(proto.centroid, acc / 100, rtol=1e-9, atol=1e-12)


def test_prototype_is_immutable():
    proto = compute_prototype(FeatureMatrix(0, np.ones((2, 2), dtype=np.float32)))
    with pytest.raises(ValueError):
        proto.centroid[0] = 5.0


@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_prototype_linearity(rows_a, rows_b, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(rows_a, 5)).astype(np.float32)
    b = rng.normal(size=(rows_b, 5)).astype(np.float32)
    pa = compute_prototype(FeatureMatrix(0, a)).centroid
    pb = compute_prototype(FeatureMatrix(0, b)).centroid
    pc = compute_prototype(FeatureMatrix(0, np.vstack([a, b]))).centroid
    weighted = (rows_a * pa + rows_b * pb) / (rows_a + rows_b)
    assert np.allclose(pc, weighted, atol=1e-9)


def test_l2_normalize_cases():
    assert np.allclose(l2_normalize([3.0, 4.0]), [0.6, 0.8])
    assert np.array_equal(l2_normalize([0.0, 0.0]), [0.0, 0.0])
    rng = np.random.default_rng(5)
    v = rng.normal(size=64)
    assert abs(np.linalg.norm(l2_normalize(v)) - 1.0) < 1e-9


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_l2_normalize_idempotent(seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=16) * rng.uniform(0.1, 100)
    once = l2_normalize(v)
    assert np.allclose(l2_normalize(once), once, atol=1e-9)


def test_l2_normalize_rows_zero_safe():
    m = np.array([[3.0, 4.0], [0.0, 0.0]])
    out = l2_normalize_rows(m)
    assert np.allclose(out[0], [0.6, 0.8])
    assert np.array_equal(out[1], [0.0, 0.0])


def test_empty_matrix_rejected():
    with pytest.raises(ContractError):
        FeatureMatrix(0, np.zeros((0, 4), dtype=np.float32))
