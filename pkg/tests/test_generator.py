import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fetril.errors import ContractError, GeometryError, ProtocolError
from fetril.feature_store import ClassPrototype
from fetril.generator import (SelectionStrategy, generate_for_past_class,
                              parse_strategy, rank_new_classes, translate)


def proto(class_id, centroid):
    return ClassPrototype(class_id, np.asarray(centroid, dtype=np.float64))


def class_data(rng, center, rows, dim):
    return center + rng.normal(size=(rows, dim))


def protos_of(features):
    return {c: proto(c, np.mean(rows, axis=0)) for c, rows in features.items()}


def test_translate_identity_when_centroids_equal():
    out = translate(np.array([1.0, 2.0]), proto(0, [5.0, 5.0]), proto(1, [5.0, 5.0]))
    assert np.array_equal(out, [1.0, 2.0])


def test_translate_arithmetic():
    out = translate(np.array([0.0, 0.0]), proto(0, [3.0, -1.0]), proto(1, [1.0, 1.0]))
    assert np.array_equal(out, [2.0, -2.0])


def test_translate_matches_elementwise_oracle_exactly():
    rng = np.random.default_rng(99)
    f = rng.normal(size=64)
    mu_t = rng.normal(size=64)
    mu_s = rng.normal(size=64)
    out = translate(f, proto(0, mu_t), proto(1, mu_s))
    oracle = np.array([f[j] + mu_t[j] - mu_s[j] for j in range(64)])
    assert np.array_equal(out, oracle)


def test_translate_dim_mismatch():
    with pytest.raises(ContractError):
        translate(np.zeros(3), proto(0, np.zeros(4)), proto(1, np.zeros(3)))


def test_rank_axis_aligned():
    order = rank_new_classes(proto(9, [1.0, 0.0]),
                             [proto(1, [1.0, 0.0]), proto(2, [0.0, 1.0])])
    assert order == [1, 2]


def test_rank_tie_breaks_by_class_id():
    order = rank_new_classes(proto(9, [1.0, 0.0]),
                             [proto(5, [2.0, 0.0]), proto(3, [1.0, 0.0])])
    assert order == [3, 5]


def test_rank_matches_bruteforce_sort():
    rng = np.random.default_rng(31)
    target = proto(100, rng.normal(size=8))
    news = [proto(i, rng.normal(size=8)) for i in range(10)]
    got = rank_new_classes(target, news)
    tc = target.centroid / np.linalg.norm(target.centroid)
    cos = {p.class_id: float(tc @ (p.centroid / np.linalg.norm(p.centroid)))
           for p in news}
    expected = sorted(cos, key=lambda c: (-cos[c], c))
    assert got == expected


def test_rank_zero_norm_rejected():
    with pytest.raises(GeometryError):
        rank_new_classes(proto(0, [0.0, 0.0]), [proto(1, [1.0, 0.0])])
    with pytest.raises(GeometryError):
        rank_new_classes(proto(0, [1.0, 0.0]), [proto(1, [0.0, 0.0])])


def test_parse_strategy():
    assert parse_strategy("k:3").k == 3
    assert parse_strategy("random", seed=5).seed == 5
    assert parse_strategy("herding").kind == "herding"
    with pytest.raises(ContractError):
        parse_strategy("k:zero")
    with pytest.raises(ContractError):
        parse_strategy("closest")
    with pytest.raises(ContractError):
        SelectionStrategy(kind="kth_similar", k=0)


def test_single_new_class_full_set_maps_mean_to_target():
    rng = np.random.default_rng(0)
    target_center = rng.normal(size=6) * 3
    target = proto(50, target_center)
    new = {7: class_data(rng, rng.normal(size=6), 40, 6)}
    result = generate_for_past_class(target, new, protos_of(new),
                                     SelectionStrategy(kind="kth_similar", k=1), 40)
    # all 40 samples used once; translated mean collapses onto the target centroid
    assert result.features.shape == (40, 6)
    assert np.allclose(result.features.mean(axis=0), target_center, rtol=1e-6, atol=1e-9)


def test_kth_clamps_to_available_classes():
    rng = np.random.default_rng(1)
    new = {1: class_data(rng, np.zeros(4), 5, 4),
           2: class_data(rng, np.ones(4), 5, 4)}
    protos = protos_of(new)
    target = proto(9, rng.normal(size=4))
    k3 = generate_for_past_class(target, new, protos,
                                 SelectionStrategy(kind="kth_similar", k=3), 5)
    k2 = generate_for_past_class(target, new, protos,
                                 SelectionStrategy(kind="kth_similar", k=2), 5)
    assert np.array_equal(k3.features, k2.features)
    assert np.array_equal(k3.source_record, k2.source_record)


def test_kth_cycles_undersized_class():
    rng = np.random.default_rng(2)
    new = {4: class_data(rng, np.zeros(3), 4, 3)}
    target = proto(9, rng.normal(size=3))
    result = generate_for_past_class(target, new, protos_of(new),
                                     SelectionStrategy(kind="kth_similar", k=1), 10)
    assert result.source_record[:, 1].tolist() == [0, 1, 2, 3, 0, 1, 2, 3, 0, 1]


def test_random_is_seed_deterministic():
    rng = np.random.default_rng(3)
    new = {c: class_data(rng, rng.normal(size=8) * 2, 20, 8) for c in (1, 2, 3)}
    protos = protos_of(new)
    target = proto(77, rng.normal(size=8))
    a = generate_for_past_class(target, new, protos,
                                SelectionStrategy(kind="random", seed=7), 12)
    b = generate_for_past_class(target, new, protos,
                                SelectionStrategy(kind="random", seed=7), 12)
    c = generate_for_past_class(target, new, protos,
                                SelectionStrategy(kind="random", seed=8), 12)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.source_record, b.source_record)
    assert not np.array_equal(a.source_record, c.source_record)


def test_random_without_replacement_when_pool_suffices():
    rng = np.random.default_rng(4)
    new = {1: class_data(rng, np.zeros(4), 10, 4),
           2: class_data(rng, np.ones(4), 10, 4)}
    result = generate_for_past_class(proto(9, rng.normal(size=4)), new,
                                     protos_of(new),
                                     SelectionStrategy(kind="random", seed=1), 15)
    pairs = {tuple(row) for row in result.source_record.tolist()}
    assert len(pairs) == 15  # no duplicates


def test_random_replacement_when_pool_small():
    rng = np.random.default_rng(5)
    new = {1: class_data(rng, np.zeros(4), 3, 4)}
    result = generate_for_past_class(proto(9, rng.normal(size=4)), new,
                                     protos_of(new),
                                     SelectionStrategy(kind="random", seed=1), 10)
    assert result.features.shape == (10, 4)


def test_herding_selects_toward_target_mean():
    rng = np.random.default_rng(6)
    new = {1: class_data(rng, np.zeros(5), 30, 5),
           2: class_data(rng, np.full(5, 4.0), 30, 5)}
    protos = protos_of(new)
    target = proto(9, rng.normal(size=5) * 2)
    result = generate_for_past_class(target, new, protos,
                                     SelectionStrategy(kind="herding"), 20)
    # herding over the translated pool keeps the selected mean near the target
    rand = generate_for_past_class(target, new, protos,
                                   SelectionStrategy(kind="random", seed=0), 20)
    herd_err = np.linalg.norm(result.features.mean(axis=0) - target.centroid)
    rand_err = np.linalg.norm(rand.features.mean(axis=0) - target.centroid)
    assert herd_err <= rand_err


def test_source_fidelity_bit_exact():
    rng = np.random.default_rng(7)
    new = {c: class_data(rng, rng.normal(size=6) * 3, 15, 6).astype(np.float32)
           for c in (1, 2, 3)}
    protos = protos_of(new)
    target = proto(42, rng.normal(size=6))
    for strategy in (SelectionStrategy(kind="kth_similar", k=2),
                     SelectionStrategy(kind="random", seed=5),
                     SelectionStrategy(kind="herding")):
        result = generate_for_past_class(target, new, protos, strategy, 12)
        for row, (src_class, src_row) in zip(result.features,
                                             result.source_record):
            redo = translate(new[int(src_class)][int(src_row)], target,
                             protos[int(src_class)])
            assert np.array_equal(row, redo), strategy.kind


@given(st.integers(0, 2**32 - 1),
       st.sampled_from(["kth_similar", "random", "herding"]),
       st.integers(1, 3), st.integers(1, 40))
@settings(max_examples=30, deadline=None)
def test_strategy_totality(seed, kind, num_new, s):
    rng = np.random.default_rng(seed)
    new = {c: class_data(rng, rng.normal(size=4), int(rng.integers(1, 12)), 4)
           for c in range(num_new)}
    protos = protos_of(new)
    target = proto(99, rng.normal(size=4))
    strategy = SelectionStrategy(kind=kind, seed=seed & 0xFFFF)
    result = generate_for_past_class(target, new, protos, strategy, s)
    assert result.features.shape == (s, 4)
    assert result.source_record.shape == (s, 2)


def test_mean_mapping_invariant():
    rng = np.random.default_rng(8)
    new = {5: class_data(rng, rng.normal(size=16) * 5, 50, 16)}
    protos = protos_of(new)
    target = proto(1, rng.normal(size=16) * 5)
    result = generate_for_past_class(target, new, protos,
                                     SelectionStrategy(kind="kth_similar"), 50)
    err = np.abs(result.features.mean(axis=0) - target.centroid)
    scale = np.maximum(np.abs(target.centroid), 1.0)
    assert (err / scale < 1e-6).all()


def test_covariance_preserved_under_translation():
    rng = np.random.default_rng(9)
    rows = class_data(rng, rng.normal(size=12) * 4, 80, 12)
    new = {3: rows}
    protos = protos_of(new)
    target = proto(1, rng.normal(size=12) * 4)
    result = generate_for_past_class(target, new, protos,
                                     SelectionStrategy(kind="kth_similar"), 80)
    cov_src = np.cov(rows, rowvar=False)
    cov_out = np.cov(result.features, rowvar=False)
    rel = np.linalg.norm(cov_out - cov_src) / np.linalg.norm(cov_src)
    assert rel < 1e-6


def test_generation_errors():
    rng = np.random.default_rng(10)
    new = {1: class_data(rng, np.zeros(4), 5, 4)}
    protos = protos_of(new)
    target = proto(9, rng.normal(size=4))
    with pytest.raises(ProtocolError):
        generate_for_past_class(target, {}, {}, SelectionStrategy(), 5)
    with pytest.raises(ContractError):
        generate_for_past_class(target, new, protos, SelectionStrategy(), 0)
    with pytest.raises(ContractError):
        generate_for_past_class(target, new, {}, SelectionStrategy(), 5)
