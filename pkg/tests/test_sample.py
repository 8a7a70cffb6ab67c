import numpy as np
import pandas as pd
import pytest

from malbench import sample
from malbench.errors import DanglingRowId, EmptyPool, InsufficientPool
from malbench.sample import DatasetSpec, SplitConfig


def _index(rows):
    return pd.DataFrame(rows, columns=["appeared", "label", "avclass",
                                       "index", "fragment"])


def _row(appeared, label, avclass, index=0, fragment=0):
    return (appeared, label, avclass, index, fragment)


def test_split_boundaries():
    # Split date 2018-07-31: July is train, August is test, the split day
    # itself (a first-of-month record cannot hit it, but an exact
    # timestamp can) belongs to neither.
    rows = [
        _row("2017-12", 1, "fam", 0),   # before first_malware_time
        _row("2018-01", 1, "fam", 1),   # first train month
        _row("2018-07", 1, "fam", 2),   # last train month
        _row("2018-08", 1, "fam", 3),   # first test month
        _row("2018-01", 0, "-", 4),
        _row("2018-08", 0, "-", 5),
    ]
    pools = sample.partition_pools(_index(rows), SplitConfig(top_n=1))
    assert list(pools.train_malware["index"]) == [1, 2]
    assert list(pools.test_malware["index"]) == [3]
    assert list(pools.train_benign["index"]) == [4]
    assert list(pools.test_benign["index"]) == [5]


def test_unlabeled_and_sentinel_excluded():
    rows = [
        _row("2018-02", 1, "fam", 0),
        _row("2018-02", 1, "-", 1),    # malware without family: excluded
        _row("2018-02", -1, "-", 2),   # unlabeled: excluded everywhere
        _row("2018-09", 1, "fam", 3),
        _row("2018-02", 0, "-", 4),
        _row("2018-09", 0, "-", 5),
    ]
    pools = sample.partition_pools(_index(rows), SplitConfig(top_n=1))
    assert list(pools.train_malware["index"]) == [0]
    assert set(pools.train_benign["index"]) == {4}
    total = (len(pools.train_malware) + len(pools.test_malware)
             + len(pools.train_benign) + len(pools.test_benign))
    assert total == 4


def test_family_intersection_filter():
    # "only_train" is top on the train side but absent from test, so it
    # drops out of both malware pools.
    rows = (
        [_row("2018-02", 1, "both", i) for i in range(3)]
        + [_row("2018-02", 1, "only_train", i + 10) for i in range(3)]
        + [_row("2018-09", 1, "both", i + 20) for i in range(3)]
        + [_row("2018-09", 1, "only_test", i + 30) for i in range(3)]
        + [_row("2018-02", 0, "-", 40), _row("2018-09", 0, "-", 41)]
    )
    pools = sample.partition_pools(_index(rows), SplitConfig(top_n=50))
    assert pools.families == {"both"}
    assert set(pools.train_malware["avclass"]) == {"both"}
    assert set(pools.test_malware["avclass"]) == {"both"}


def test_top_n_limits_families():
    rows = []
    idx = 0
    for fam, n_train, n_test in [("a", 5, 5), ("b", 3, 3), ("c", 1, 1)]:
        for _ in range(n_train):
            rows.append(_row("2018-02", 1, fam, idx)); idx += 1
        for _ in range(n_test):
            rows.append(_row("2018-09", 1, fam, idx)); idx += 1
    rows += [_row("2018-02", 0, "-", idx), _row("2018-09", 0, "-", idx + 1)]
    pools = sample.partition_pools(_index(rows), SplitConfig(top_n=2))
    assert pools.families == {"a", "b"}


def test_family_tie_break_deterministic():
    # Equal counts: ties break on the family name ascending.
    rows = []
    idx = 0
    for fam in ("zeta", "alpha", "mid"):
        for _ in range(2):
            rows.append(_row("2018-02", 1, fam, idx)); idx += 1
            rows.append(_row("2018-09", 1, fam, idx)); idx += 1
    rows += [_row("2018-02", 0, "-", idx), _row("2018-09", 0, "-", idx + 1)]
    pools = sample.partition_pools(_index(rows), SplitConfig(top_n=2))
    assert pools.families == {"alpha", "mid"}


def test_empty_pool_raises():
    rows = [_row("2018-02", 1, "fam", 0), _row("2018-09", 1, "fam", 1),
            _row("2018-02", 0, "-", 2)]  # no test benign
    with pytest.raises(EmptyPool):
        sample.partition_pools(_index(rows), SplitConfig(top_n=1))


def test_dataset_spec_name_and_counts():
    spec = DatasetSpec(role="test", n_malware=1250, benign_ratio=128,
                       feature_set="combined", seed=1337)
    assert spec.n_benign == 160_000
    assert spec.name == "test_1250_malware_x128_benign_combined_s1337"


def test_dataset_spec_validation():
    with pytest.raises(ValueError):
        DatasetSpec(role="dev", n_malware=1, benign_ratio=1,
                    feature_set="combined", seed=0)
    with pytest.raises(ValueError):
        DatasetSpec(role="train", n_malware=0, benign_ratio=1,
                    feature_set="combined", seed=0)
    with pytest.raises(ValueError):
        DatasetSpec(role="train", n_malware=1, benign_ratio=1,
                    feature_set="mystery", seed=0)


def test_draw_dataset_counts_and_determinism(pools):
    spec = DatasetSpec(role="train", n_malware=50, benign_ratio=2,
                       feature_set="combined", seed=1337)
    a = sample.draw_dataset(pools, spec)
    b = sample.draw_dataset(pools, spec)
    assert len(a) == 150
    assert (a.rows["label"] == 1).sum() == 50
    assert (a.rows["label"] == 0).sum() == 100
    assert a.rows.equals(b.rows)


def test_draw_dataset_seed_divergence(pools):
    base = dict(role="train", n_malware=50, benign_ratio=1,
                feature_set="combined")
    a = sample.draw_dataset(pools, DatasetSpec(seed=1337, **base))
    b = sample.draw_dataset(pools, DatasetSpec(seed=1338, **base))
    assert not a.rows.equals(b.rows)


def test_draw_dataset_no_duplicates(pools):
    spec = DatasetSpec(role="test", n_malware=80, benign_ratio=3,
                       feature_set="parsed", seed=1339)
    ds = sample.draw_dataset(pools, spec)
    keys = list(zip(ds.rows["fragment"], ds.rows["index"]))
    assert len(set(keys)) == len(keys)
    assert keys == sorted(keys)


def test_draw_dataset_insufficient(pools):
    spec = DatasetSpec(role="train", n_malware=10**6, benign_ratio=1,
                       feature_set="combined", seed=1)
    with pytest.raises(InsufficientPool):
        sample.draw_dataset(pools, spec)


def test_materialize_shapes(pools, manifest):
    spec = DatasetSpec(role="train", n_malware=30, benign_ratio=1,
                       feature_set="format_agnostic", seed=7)
    ds = sample.draw_dataset(pools, spec)
    X, y, meta = sample.materialize(ds, manifest)
    assert X.shape == (60, 616)
    assert X.dtype == np.float64
    assert sorted(np.unique(y)) == [0, 1]
    assert len(meta) == 60
    X2, _, _ = sample.materialize(ds, manifest, feature_set="combined")
    assert X2.shape == (60, 1385)


def test_materialize_matches_fragment_values(pools, manifest):
    spec = DatasetSpec(role="test", n_malware=10, benign_ratio=1,
                       feature_set="combined", seed=11)
    ds = sample.draw_dataset(pools, spec)
    X, y, _ = sample.materialize(ds, manifest)
    row = ds.rows.iloc[0]
    frame = pd.read_csv(manifest.fragment_path(int(row["fragment"])))
    from malbench.vectorize import LAYOUT
    expected = frame.iloc[int(row["index"])][list(LAYOUT.feature_names)]
    np.testing.assert_allclose(X[0], expected.to_numpy(np.float64))


def test_materialize_dangling_row(manifest, pools):
    spec = DatasetSpec(role="train", n_malware=5, benign_ratio=1,
                       feature_set="combined", seed=3)
    ds = sample.draw_dataset(pools, spec)
    ds.rows.loc[0, "fragment"] = 999
    with pytest.raises(DanglingRowId):
        sample.materialize(ds, manifest)


def test_fragment_store_lru(manifest):
    store = sample.FragmentStore(manifest, cache_size=1)
    a = store.get(0)
    assert store.get(0) is a          # cached
    store.get(1)                      # evicts fragment 0
    assert store.get(0) is not a


def test_save_dataset(pools, manifest, tmp_path):
    spec = DatasetSpec(role="train", n_malware=10, benign_ratio=1,
                       feature_set="parsed", seed=5)
    ds = sample.draw_dataset(pools, spec)
    path = sample.save_dataset(ds, manifest, str(tmp_path))
    df = pd.read_csv(path)
    assert len(df) == 20
    assert df.columns[0] == "appeared"
    assert list(df.columns[-2:]) == ["label", "avclass"]
    assert len(df.columns) == 769 + 3
