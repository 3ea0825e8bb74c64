import numpy as np
import pytest

from landsense import dataset as D
from landsense.dataset import (SENTINEL_DB, Dataset, binarize_labels, build_dataset,
                               load_csv, perturb, rebalance, save_csv, select_top_n,
                               split)
from landsense.errors import InvalidArgument
from landsense.propagation import PropagationParams
from landsense.scene import BARREN, FOREST, STREET, sample_ue_drops

S = SENTINEL_DB


def make_ds(features, labels, N=None, K=None):
    features = np.asarray(features, dtype=np.float64)
    K = K or features.shape[1]
    return Dataset(features=features, labels=np.asarray(labels), K=K,
                   N=N or K)


def test_select_top_n_identity_when_n_equals_k():
    gains = np.array([-80.0, -95.0, -70.0, -110.0])
    assert np.array_equal(select_top_n(gains, 4), gains)


def test_select_top_n_single_maximum():
    out = select_top_n(np.array([-80.0, -90.0, -70.0]), 1)
    assert np.array_equal(out, [S, S, -70.0])


def test_select_top_n_tie_breaks_to_lower_index():
    out = select_top_n(np.array([-80.0, -80.0, -90.0]), 1)
    assert np.array_equal(out, [-80.0, S, S])


def test_select_top_n_validates_n():
    with pytest.raises(InvalidArgument):
        select_top_n(np.zeros(3) - 50, 4)
    with pytest.raises(InvalidArgument):
        select_top_n(np.zeros(3) - 50, 0)


def test_select_top_n_matches_sort_oracle():
    rng = np.random.default_rng(8)
    for trial in range(1000):
        K = int(rng.integers(2, 30))
        gains = rng.uniform(-150, -40, K)
        if trial % 3 == 0:  # force ties
            gains = np.round(gains / 10) * 10
        N = int(rng.integers(1, K + 1))
        out = select_top_n(gains, N)
        # oracle: stable sort by (-gain, index)
        order = sorted(range(K), key=lambda i: (-gains[i], i))
        keep = set(order[:N])
        expect = np.array([gains[i] if i in keep else S for i in range(K)])
        assert np.array_equal(out, expect), (trial, gains, N)
        assert int((out != S).sum()) == N or (gains <= S).any()


def test_select_top_n_degenerate_rows_keep_usable_paths():
    gains = np.array([[-50.0, S, S, S]])
    masked, degenerate = D._mask_matrix(gains, 3, S)
    assert np.array_equal(masked[0], gains[0])
    assert degenerate[0]
    ok, flag = D._mask_matrix(np.array([[-50.0, -60.0, -70.0, -80.0]]), 3, S)
    assert not flag[0]
    assert int((ok != S).sum()) == 3


def test_build_dataset_rows_and_labels(small_scene, low_layer):
    drops = sample_ue_drops(small_scene, 300, seed=3)
    ds = build_dataset(small_scene, low_layer, drops, N=5,
                       params=PropagationParams(), master_seed=1)
    assert ds.L == 300 and ds.K == low_layer.K and ds.N == 5
    assert np.array_equal(ds.labels,
                          np.array([d.true_category for d in drops]))
    # S_N cardinality on non-degenerate rows
    non_sentinel = (ds.features != ds.sentinel_db).sum(axis=1)
    assert (non_sentinel[~ds.degenerate] == 5).all()
    # label histogram equals drop histogram
    want = {}
    for d in drops:
        want[d.true_category] = want.get(d.true_category, 0) + 1
    assert ds.class_counts() == want


def test_build_dataset_minimal_k1():
    from conftest import uniform_scene
    from landsense.scene import BaseStation, Deployment, UEDrop
    scene = uniform_scene(FOREST)
    dep = Deployment(layer_name="solo",
                     stations=(BaseStation(1, 50.0, 50.0, 10.0, 8e8),), seed=0)
    ds = build_dataset(scene, dep, [UEDrop(20.0, 20.0, FOREST)], N=1,
                       params=PropagationParams(), master_seed=0)
    assert ds.features.shape == (1, 1)
    assert ds.labels.tolist() == [FOREST]


def test_build_dataset_deterministic(small_scene, low_layer):
    drops = sample_ue_drops(small_scene, 50, seed=3)
    a = build_dataset(small_scene, low_layer, drops, 10, PropagationParams(), 9)
    b = build_dataset(small_scene, low_layer, drops, 10, PropagationParams(), 9)
    assert np.array_equal(a.features, b.features)


def test_binarize_labels_basic():
    ds = make_ds(np.zeros((4, 2)) - 60, [STREET, FOREST, STREET, 0])
    out = binarize_labels(ds, STREET)
    assert out.labels.tolist() == [1, 0, 1, 0]
    assert np.array_equal(out.features, ds.features)


def test_binarize_absent_target_all_zero():
    ds = make_ds(np.zeros((3, 2)) - 60, [FOREST, FOREST, 0])
    assert binarize_labels(ds, STREET).labels.tolist() == [0, 0, 0]


def test_binarize_counts_and_idempotence():
    labels = [STREET, FOREST, STREET, BARREN, STREET]
    ds = make_ds(np.zeros((5, 2)) - 60, labels)
    once = binarize_labels(ds, STREET)
    assert int(once.labels.sum()) == labels.count(STREET)
    twice = binarize_labels(once, STREET)
    assert np.array_equal(once.labels, twice.labels)
    assert len(twice) == len(ds)


def test_binarize_unknown_target():
    ds = make_ds(np.zeros((2, 2)) - 60, [0, 4])
    with pytest.raises(InvalidArgument):
        binarize_labels(ds, 99)


def test_rebalance_undersample_counts():
    rng = np.random.default_rng(0)
    feats = rng.normal(-80, 5, (400, 3))
    labels = np.array([STREET] * 100 + [15] * 300)
    ds = make_ds(feats, labels)
    out = rebalance(ds, "undersample", seed=1)
    assert out.class_counts() == {STREET: 100, 15: 100}


def test_rebalance_oversample_counts():
    feats = np.random.default_rng(0).normal(-80, 5, (400, 3))
    ds = make_ds(feats, np.array([STREET] * 100 + [15] * 300))
    out = rebalance(ds, "oversample", seed=1)
    assert out.class_counts() == {STREET: 300, 15: 300}


def test_rebalance_four_classes_flat():
    rng = np.random.default_rng(1)
    labels = np.concatenate([np.full(n, c) for n, c in
                             [(500, 0), (200, 4), (120, 11), (80, 15)]])
    ds = make_ds(rng.normal(-80, 5, (900, 2)), labels)
    for mode, expect in (("undersample", 80), ("oversample", 500)):
        out = rebalance(ds, mode, seed=2)
        counts = out.class_counts()
        assert set(counts.values()) == {expect}
        assert len(counts) == 4


def test_rebalance_undersample_never_invents_rows():
    rng = np.random.default_rng(5)
    feats = rng.normal(-90, 10, (120, 4))
    labels = np.array([0] * 80 + [4] * 40)
    ds = make_ds(feats, labels)
    out = rebalance(ds, "undersample", seed=3)
    pool = {tuple(row) for row in ds.features}
    assert all(tuple(row) in pool for row in out.features)


def test_rebalance_single_class_rejected():
    ds = make_ds(np.zeros((5, 2)) - 70, [4] * 5)
    with pytest.raises(InvalidArgument):
        rebalance(ds, "undersample", seed=0)


def test_rebalance_deterministic():
    rng = np.random.default_rng(2)
    ds = make_ds(rng.normal(-80, 4, (100, 2)), [0] * 60 + [4] * 40)
    a = rebalance(ds, "undersample", seed=9)
    b = rebalance(ds, "undersample", seed=9)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)


def test_perturb_zero_sigma_identity():
    rng = np.random.default_rng(3)
    ds = make_ds(rng.normal(-85, 6, (50, 4)), [0] * 50)
    out = perturb(ds, 0.0, seed=1)
    assert np.array_equal(out.features, ds.features)
    assert np.array_equal(out.labels, ds.labels)


def test_perturb_keeps_sentinels_and_labels():
    feats = np.full((30, 5), S)
    feats[:, 0] = -70.0
    feats[:, 2] = -90.0
    ds = make_ds(feats, [4] * 30, N=2)
    out = perturb(ds, 3.0, seed=7)
    assert (out.features[:, [1, 3, 4]] == S).all()
    assert not np.array_equal(out.features[:, 0], ds.features[:, 0])
    assert np.array_equal(out.labels, ds.labels)


def test_perturb_noise_mean_within_bounds():
    L, K, sigma = 20000, 3, 2.0
    ds = make_ds(np.full((L, K), -80.0), [0] * L)
    out = perturb(ds, sigma, seed=11)
    delta = out.features - ds.features
    # per-feature sample mean within 3*sigma/sqrt(L) of 0
    bound = 3.0 * sigma / np.sqrt(L)
    assert (np.abs(delta.mean(axis=0)) < bound).all()


def test_perturb_variance_composes():
    L, s1, s2 = 40000, 1.5, 2.0
    ds = make_ds(np.full((L, 2), -80.0), [0] * L)
    out = perturb(perturb(ds, s1, seed=1), s2, seed=2)
    delta = (out.features - ds.features).ravel()
    var = delta.var()
    expect = s1 * s1 + s2 * s2
    # 5-sigma bound on the variance estimate
    bound = 5.0 * expect * np.sqrt(2.0 / (delta.size - 1))
    assert abs(var - expect) < bound


def test_split_counts_and_disjoint():
    rng = np.random.default_rng(4)
    ds = make_ds(rng.normal(-80, 5, (40000, 2)), rng.integers(0, 3, 40000))
    train, val = split(ds, 0.5, seed=5)
    assert train.L == 20000 and val.L == 20000
    assert train.L + val.L == ds.L
    # no row index in both: features unioned as multisets match original
    both = np.vstack([train.features, val.features])
    assert np.array_equal(np.sort(both, axis=0), np.sort(ds.features, axis=0))


def test_split_no_shared_rows():
    ds = make_ds(np.arange(100, dtype=float).reshape(50, 2), [0] * 25 + [4] * 25)
    train, val = split(ds, 0.6, seed=0)
    seen = {tuple(r) for r in train.features}
    assert not any(tuple(r) in seen for r in val.features)


def test_split_degenerate_fraction():
    ds = make_ds(np.zeros((3, 2)) - 70, [0, 4, 0])
    with pytest.raises(InvalidArgument):
        split(ds, 0.01, seed=0)
    with pytest.raises(InvalidArgument):
        split(ds, 1.0, seed=0)


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    feats = np.round(rng.normal(-85, 7, (20, 4)), 4)
    feats[3, 2] = S
    ds = Dataset(features=feats, labels=rng.integers(0, 2, 20), K=4, N=2,
                 layer_name="5GHz", seed=123)
    path = tmp_path / "ds.csv"
    save_csv(ds, path)
    text = path.read_text().splitlines()
    assert text[0] == "g_1,g_2,g_3,g_4,label"
    assert "-200.0000" in text[4]
    loaded = load_csv(path)
    assert loaded.K == 4 and loaded.N == 2 and loaded.L == 20
    assert loaded.layer_name == "5GHz" and loaded.seed == 123
    assert np.allclose(loaded.features, feats, atol=1e-9)
    assert np.array_equal(loaded.labels, ds.labels)
