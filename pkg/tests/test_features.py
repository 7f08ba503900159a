import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boostcrf import FeatureSetKind, build_feature_set, compute_norm_stats, extract_obs_features, normalize
from boostcrf.features import compile_features, expected_feature_count
from boostcrf.model import NormStats, eval_feature


def test_obs_features_of_a_345_step():
    g = extract_obs_features([(0, 0), (3, 4)])
    assert g[1].tolist() == [3, 4, 3, 4, 5]
    assert g[0].tolist() == [0, 0, 0, 0, 0]


def test_single_point_has_zero_velocity():
    assert extract_obs_features([(1, 1)]).tolist() == [[1, 1, 0, 0, 0]]


def test_stationary_track_has_no_motion():
    g = extract_obs_features(np.full((5, 2), 0.3))
    assert not g[:, 2:].any()


@pytest.mark.parametrize("kind,L,W,K", [
    ("persist", 5, 1, 30), ("transition", 5, 1, 125), ("transition", 7, 1, 245),
    ("context", 5, 11, 1375), ("context", 7, 11, 2695), ("bridge", 5, 1, 50),
])
def test_table_feature_counts(kind, L, W, K):
    assert len(build_feature_set(kind, L, W)) == K


@pytest.mark.parametrize("L", range(2, 11))
@pytest.mark.parametrize("W", [1, 3, 5, 11])
def test_counts_match_closed_forms(L, W):
    for kind in ("persist", "transition", "bridge"):
        assert len(build_feature_set(kind, L)) == expected_feature_count(kind, L)
    assert len(build_feature_set("context", L, W)) == 5 * W * L * L


def test_ids_are_dense_and_ordered():
    feats = build_feature_set("context", 3, 3)
    assert [f.id for f in feats] == list(range(len(feats)))
    keys = [(f.l1, f.l2, f.m, f.eps) for f in feats]
    assert keys == sorted(keys)


def test_context_window_one_is_transition():
    ctx = build_feature_set("context", 4, 1)
    tr = build_feature_set("transition", 4)
    assert [(f.id, f.l1, f.l2, f.m, f.eps) for f in ctx] == [(f.id, f.l1, f.l2, f.m, f.eps) for f in tr]
    g = np.random.default_rng(0).normal(size=(4, 5))
    for a, b in zip(ctx, tr):
        for y in ((0, 1), (2, 3), (3, 3)):
            assert eval_feature(a, g, 2, y) == eval_feature(b, g, 2, y)


def test_even_window_is_rejected():
    with pytest.raises(ValueError):
        FeatureSetKind("context", 4)
    with pytest.raises(ValueError):
        FeatureSetKind("mystery")


def test_persist_label_label_features_sit_on_the_diagonal():
    for f in build_feature_set("persist", 5):
        if f.kind == "persist":
            assert f.l1 == f.l2


def test_identity_stats_leave_channels_alone():
    g = np.random.default_rng(1).normal(size=(6, 5))
    assert np.array_equal(normalize(g, NormStats.identity()), g)


def test_constant_channel_normalises_to_zero():
    g = np.random.default_rng(2).normal(size=(8, 5))
    g[:, 3] = 7.0
    with pytest.warns(RuntimeWarning, match="constant"):
        stats = compute_norm_stats([g])
    assert stats.std[3] == 1.0
    assert np.allclose(normalize(g, stats)[:, 3], 0.0)


def test_normalised_moments():
    rng = np.random.default_rng(3)
    gs = [rng.normal(3, 2, size=(int(rng.integers(2, 9)), 5)) for _ in range(6)]
    stats = compute_norm_stats(gs)
    z = np.concatenate([normalize(g, stats) for g in gs])
    assert np.allclose(z.mean(axis=0), 0, atol=1e-9)
    assert np.allclose(z.var(axis=0), 1, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["persist", "transition", "context", "bridge"]),
       st.integers(2, 5), st.sampled_from([1, 3, 5]), st.integers(1, 7), st.integers(0, 2**31))
def test_feature_table_reproduces_eval_feature(kind, L, W, T, seed):
    rng = np.random.default_rng(seed)
    feats = build_feature_set(kind, L, W)
    g = rng.normal(size=(T, 5))
    table = compile_features(tuple(feats))
    vals = table.values(g)
    w = rng.normal(size=len(feats))
    wn, we = table.weight_tensors(w, L)
    node = vals @ wn
    edge = np.einsum("tc,cab->tab", vals, we)
    for t in range(T):
        for y in range(L):
            ref = sum(wk * eval_feature(f, g, t, (y,)) for f, wk in zip(feats, w) if f.kind == "data")
            assert node[t, y] == pytest.approx(ref, abs=1e-10)
    for t in range(1, T):
        a, b = rng.integers(L, size=2)
        ref = sum(wk * eval_feature(f, g, t, (a, b)) for f, wk in zip(feats, w) if f.kind != "data")
        assert edge[t, a, b] == pytest.approx(ref, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31))
def test_indicator_features_bounded(T, seed):
    g = np.random.default_rng(seed).normal(size=(T, 5))
    bound = np.abs(g).max()
    for f in build_feature_set("bridge", 3) + build_feature_set("context", 3, 3):
        for t in range(1 if f.clique_kind == "edge" else 0, T):
            v = eval_feature(f, g, t, (1, 2) if f.clique_kind == "edge" else (1,))
            assert abs(v) <= (1.0 if not f.uses_channel else bound)
