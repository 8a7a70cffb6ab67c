"""Timeline-aware, family-stratified train/test dataset construction.

Pools are split at a fixed date (training strictly before, testing
strictly after; samples dated exactly at the split belong to neither).
Malware pools are restricted to the intersection of the top-N families on
each side of the split. Draws are uniform without replacement via a
seeded permutation over the deterministic (fragment, index) pool order.
"""

from __future__ import annotations

import os
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DanglingRowId, EmptyPool, InsufficientPool
from .fragments import FragmentManifest
from .ingest import AVCLASS_SENTINEL
from .vectorize import FEATURE_SET_VARIANTS, feature_columns

DEFAULT_FIRST_MALWARE_TIME = pd.Timestamp("2018-01-01 00:00:00")
DEFAULT_SPLIT_TIME = pd.Timestamp("2018-07-31 00:00:00")
DEFAULT_TOP_N = 50


@dataclass(frozen=True)
class SplitConfig:
    first_malware_time: pd.Timestamp = DEFAULT_FIRST_MALWARE_TIME
    split_time: pd.Timestamp = DEFAULT_SPLIT_TIME
    top_n: int = DEFAULT_TOP_N

    def __post_init__(self):
        if not self.first_malware_time < self.split_time:
            raise ValueError("first_malware_time must precede split_time")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


@dataclass
class Pools:
    """Four disjoint row pools over the metadata index."""

    train_malware: pd.DataFrame
    test_malware: pd.DataFrame
    train_benign: pd.DataFrame
    test_benign: pd.DataFrame
    families: set = field(default_factory=set)

    def pool(self, role: str, malware: bool) -> pd.DataFrame:
        if role == "train":
            return self.train_malware if malware else self.train_benign
        if role == "test":
            return self.test_malware if malware else self.test_benign
        raise ValueError(f"unknown role {role!r}")


def _top_families(counts: pd.Series, top_n: int) -> set:
    # Deterministic tie-break: count descending, then family name ascending.
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {fam for fam, _ in ordered[:top_n]}


def partition_pools(index: pd.DataFrame, cfg: SplitConfig = SplitConfig()) -> Pools:
    """Partition a metadata index into the four sampling pools."""
    if len(index) == 0:
        raise EmptyPool("metadata index is empty")
    meta = index.copy()
    meta["appeared_ts"] = pd.to_datetime(meta["appeared"])
    meta = meta.sort_values(["fragment", "index"], kind="mergesort")

    malware_mask = (meta["avclass"] != AVCLASS_SENTINEL) & (meta["label"] == 1)
    benign_mask = meta["label"] == 0
    train_mask = (meta["appeared_ts"] >= cfg.first_malware_time) & (
        meta["appeared_ts"] < cfg.split_time)
    test_mask = meta["appeared_ts"] > cfg.split_time

    train_counts = meta.loc[malware_mask & train_mask, "avclass"].value_counts()
    test_counts = meta.loc[malware_mask & test_mask, "avclass"].value_counts()
    families = _top_families(train_counts, cfg.top_n) & _top_families(
        test_counts, cfg.top_n)

    intersect_mask = meta["avclass"].isin(families)
    pools = Pools(
        train_malware=meta[malware_mask & train_mask & intersect_mask],
        test_malware=meta[malware_mask & test_mask & intersect_mask],
        train_benign=meta[benign_mask & train_mask],
        test_benign=meta[benign_mask & test_mask],
        families=families,
    )
    for name in ("train_malware", "test_malware", "train_benign", "test_benign"):
        if len(getattr(pools, name)) == 0:
            raise EmptyPool(
                f"pool '{name}' is empty "
                f"(split {cfg.split_time.date()}, top_n {cfg.top_n}, "
                f"{len(families)} intersection families)")
    return pools


@dataclass(frozen=True)
class DatasetSpec:
    role: str
    n_malware: int
    benign_ratio: int
    feature_set: str
    seed: int

    def __post_init__(self):
        if self.role not in ("train", "test"):
            raise ValueError(f"role must be train/test, got {self.role!r}")
        if self.n_malware < 1 or self.benign_ratio < 1:
            raise ValueError("n_malware and benign_ratio must be >= 1")
        if self.feature_set not in FEATURE_SET_VARIANTS:
            raise ValueError(f"unknown feature set {self.feature_set!r}")

    @property
    def n_benign(self) -> int:
        return self.n_malware * self.benign_ratio

    @property
    def name(self) -> str:
        return (f"{self.role}_{self.n_malware}_malware_x{self.benign_ratio}"
                f"_benign_{self.feature_set}_s{self.seed}")


@dataclass
class Dataset:
    spec: DatasetSpec
    rows: pd.DataFrame  # columns: appeared, label, avclass, index, fragment

    def __len__(self) -> int:
        return len(self.rows)


def _draw(pool: pd.DataFrame, n: int, rng: np.random.Generator,
          pool_name: str) -> pd.DataFrame:
    if n > len(pool):
        raise InsufficientPool(pool_name, n, len(pool))
    picked = rng.permutation(len(pool))[:n]
    return pool.iloc[np.sort(picked)]


def draw_dataset(pools: Pools, spec: DatasetSpec) -> Dataset:
    """Draw exactly n_malware + n_malware*benign_ratio rows, seeded.

    Each class is drawn by a Fisher-Yates permutation (PCG64, seeded by
    spec.seed) over the pool's (fragment, index) order, taking the first
    n entries; identical (pools, spec) always yield the identical row set.
    """
    malware = _draw(pools.pool(spec.role, True), spec.n_malware,
                    np.random.default_rng(spec.seed),
                    f"{spec.role}_malware")
    benign = _draw(pools.pool(spec.role, False), spec.n_benign,
                   np.random.default_rng(spec.seed),
                   f"{spec.role}_benign")
    rows = pd.concat([malware, benign], ignore_index=True)
    rows = rows.sort_values(["fragment", "index"],
                            kind="mergesort").reset_index(drop=True)
    return Dataset(spec=spec, rows=rows)


class FragmentStore:
    """Bounded LRU cache of fully loaded fragment frames."""

    def __init__(self, manifest: FragmentManifest, cache_size: int = 1):
        self.manifest = manifest
        self.cache_size = max(1, cache_size)
        self._cache: OrderedDict[int, pd.DataFrame] = OrderedDict()
        self._ids = {f.fragment_id for f in manifest.fragments}

    def get(self, fragment_id: int) -> pd.DataFrame:
        if fragment_id not in self._ids:
            raise DanglingRowId(f"fragment {fragment_id} not in manifest")
        if fragment_id in self._cache:
            self._cache.move_to_end(fragment_id)
            return self._cache[fragment_id]
        df = pd.read_csv(self.manifest.fragment_path(fragment_id),
                         dtype={"appeared": str, "avclass": str})
        self._cache[fragment_id] = df
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return df


def materialize(ds: Dataset, fragments: FragmentManifest | FragmentStore,
                feature_set: str | None = None):
    """Gather a dataset's rows into (X, y, meta).

    X is row-major float64 of width len(feature_columns(feature_set));
    rows are ordered by (fragment, index).
    """
    store = (fragments if isinstance(fragments, FragmentStore)
             else FragmentStore(fragments))
    variant = feature_set or ds.spec.feature_set
    cols = feature_columns(variant)

    parts_x, parts_meta = [], []
    for fragment_id, group in ds.rows.groupby("fragment", sort=True):
        frame = store.get(int(fragment_id))
        idx = group["index"].to_numpy()
        if len(idx) and idx.max() >= len(frame):
            raise DanglingRowId(
                f"row {idx.max()} beyond fragment {fragment_id} "
                f"({len(frame)} rows)")
        sub = frame.iloc[idx]
        parts_x.append(sub[cols].to_numpy(dtype=np.float64))
        parts_meta.append(sub[["appeared", "label", "avclass"]])

    X = np.vstack(parts_x)
    meta = pd.concat(parts_meta, ignore_index=True)
    y = meta["label"].to_numpy(dtype=np.int64)
    return X, y, meta


def save_dataset(ds: Dataset, fragments, out_dir: str,
                 feature_set: str | None = None) -> str:
    """Persist a materialized dataset in the fragment CSV format."""
    variant = feature_set or ds.spec.feature_set
    cols = feature_columns(variant)
    X, y, meta = materialize(ds, fragments, variant)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, ds.spec.name + ".csv")
    out = pd.DataFrame(X, columns=cols)
    out.insert(0, "appeared", meta["appeared"].to_numpy())
    out["label"] = y
    out["avclass"] = meta["avclass"].to_numpy()
    out.to_csv(path, index=False)
    return path
