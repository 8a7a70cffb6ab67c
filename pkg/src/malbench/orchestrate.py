"""Experiment grid enumeration and execution.

The default grid poses three questions: (1) accuracy vs training size on
balanced test sets, (2) recall at the target FPR vs training size on an
imbalanced test set, (3) recall at the target FPR vs test-set imbalance
at the largest training size. One model is trained per (algorithm,
feature_set, train size, seed) and reused across questions. Execution is
resumable and its output is independent of worker scheduling: results are
gathered and written in plan order.
"""

from __future__ import annotations

import csv
import json
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import pandas as pd

from . import evaluate, learn
from .analyze import RESULTS_COLUMNS
from .errors import InsufficientPool, InvalidLevels, IoFailure, MalbenchError
from .fragments import FragmentManifest
from .learn import model_filename
from .sample import (
    DatasetSpec,
    FragmentStore,
    Pools,
    SplitConfig,
    draw_dataset,
    materialize,
)
from .vectorize import FEATURE_SET_VARIANTS

DEFAULT_TRAIN_SIZES = [100, 200, 400, 800, 1600, 3200, 6400, 12800,
                       25600, 51200, 102400]
DEFAULT_Q3_RATIOS = [1, 2, 4, 8, 16, 32, 64, 128]
DEFAULT_SEEDS = [1337, 1338, 1339]
DEFAULT_TEST_N_MALWARE = 1250
DEFAULT_Q2_RATIO = 128
DEFAULT_TARGET_FPR = 0.01


@dataclass(frozen=True)
class RunSpec:
    question: int
    train_n_malware: int
    test_n_malware: int
    test_benign_ratio: int
    algorithm: str
    feature_set: str
    perf_measure: str
    seed: int

    @property
    def train_set_size(self) -> int:
        # Training sets are balanced, so size is twice the malware count.
        return self.train_n_malware * 2

    @property
    def test_set_size(self) -> int:
        return self.test_n_malware * (1 + self.test_benign_ratio)

    @property
    def test_set_ratio(self) -> str:
        return f"1:{self.test_benign_ratio}"

    @property
    def key(self) -> tuple:
        return (str(self.question), self.algorithm, self.feature_set,
                str(self.train_set_size), self.test_set_ratio,
                self.perf_measure, str(self.seed))


@dataclass
class ExperimentConfig:
    train_sizes: list = field(default_factory=lambda: list(DEFAULT_TRAIN_SIZES))
    q3_ratios: list = field(default_factory=lambda: list(DEFAULT_Q3_RATIOS))
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))
    algorithms: list = field(default_factory=lambda: list(learn.ALGORITHM_TAGS))
    feature_sets: list = field(default_factory=lambda: list(FEATURE_SET_VARIANTS))
    test_n_malware: int = DEFAULT_TEST_N_MALWARE
    q2_ratio: int = DEFAULT_Q2_RATIO
    q3_train_n_malware: int | None = None
    target_fpr: float = DEFAULT_TARGET_FPR
    first_malware_time: str = "2018-01-01"
    split_time: str = "2018-07-31"
    top_n: int = 50
    hyperparams: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise IoFailure(f"cannot read config: {exc}") from exc
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidLevels(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def split_config(self) -> SplitConfig:
        return SplitConfig(first_malware_time=pd.Timestamp(self.first_malware_time),
                           split_time=pd.Timestamp(self.split_time),
                           top_n=self.top_n)


def _check_doubling(levels, what):
    if not levels:
        raise InvalidLevels(f"{what} must not be empty")
    if any(x < 1 for x in levels):
        raise InvalidLevels(f"{what} must be positive")
    for a, b in zip(levels, levels[1:]):
        if b != 2 * a:
            raise InvalidLevels(f"{what}: {b} is not double {a}")


def plan(config: ExperimentConfig) -> list[RunSpec]:
    """Enumerate the grid in deterministic
    (question, level, algorithm, feature_set, seed) order."""
    _check_doubling(sorted(config.train_sizes), "train_sizes")
    _check_doubling(sorted(config.q3_ratios), "q3_ratios")
    if not config.seeds:
        raise InvalidLevels("seeds must not be empty")
    if not config.algorithms:
        raise InvalidLevels("algorithms must not be empty")
    if unknown := set(config.algorithms) - set(learn.ALGORITHM_TAGS):
        raise InvalidLevels(f"unknown algorithms: {sorted(unknown)}")
    if not config.feature_sets:
        raise InvalidLevels("feature_sets must not be empty")
    if unknown := set(config.feature_sets) - set(FEATURE_SET_VARIANTS):
        raise InvalidLevels(f"unknown feature sets: {sorted(unknown)}")
    if not 0.0 < config.target_fpr < 1.0:
        raise InvalidLevels("target_fpr must be in (0,1)")

    q3_train = config.q3_train_n_malware or max(config.train_sizes)
    runs = []
    for n in sorted(config.train_sizes):
        for algorithm in config.algorithms:
            for feature_set in config.feature_sets:
                for seed in config.seeds:
                    runs.append(RunSpec(1, n, n, 1, algorithm, feature_set,
                                        "accuracy", seed))
    for n in sorted(config.train_sizes):
        for algorithm in config.algorithms:
            for feature_set in config.feature_sets:
                for seed in config.seeds:
                    runs.append(RunSpec(2, n, config.test_n_malware,
                                        config.q2_ratio, algorithm,
                                        feature_set, "real-life", seed))
    for ratio in sorted(config.q3_ratios):
        for algorithm in config.algorithms:
            for feature_set in config.feature_sets:
                for seed in config.seeds:
                    runs.append(RunSpec(3, q3_train, config.test_n_malware,
                                        ratio, algorithm, feature_set,
                                        "real-life", seed))
    return runs


def check_pool_capacity(runs: list[RunSpec], pools: Pools) -> None:
    need_train_m = max(r.train_n_malware for r in runs)
    need_test_m = max(r.test_n_malware for r in runs)
    need_test_b = max(r.test_n_malware * r.test_benign_ratio for r in runs)
    checks = [
        ("train_malware", need_train_m, len(pools.train_malware)),
        ("train_benign", need_train_m, len(pools.train_benign)),
        ("test_malware", need_test_m, len(pools.test_malware)),
        ("test_benign", need_test_b, len(pools.test_benign)),
    ]
    for name, need, have in checks:
        if need > have:
            raise InsufficientPool(name, need, have)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return str(value)
    return str(value)


class _Executor:
    def __init__(self, manifest: FragmentManifest, pools: Pools,
                 target_fpr: float, hyperparams: dict,
                 model_dir: str | None):
        self.pools = pools
        self.target_fpr = target_fpr
        self.hyperparams = hyperparams or {}
        self.model_dir = model_dir
        self.store = FragmentStore(manifest, cache_size=2)
        self.models: dict[tuple, learn.TrainedModel] = {}
        self._store_lock = threading.Lock()

    def _materialize(self, role, n_malware, ratio, feature_set, seed):
        spec = DatasetSpec(role=role, n_malware=n_malware,
                           benign_ratio=ratio, feature_set=feature_set,
                           seed=seed)
        ds = draw_dataset(self.pools, spec)
        with self._store_lock:
            return materialize(ds, self.store)

    def train_models(self, train_keys: list[tuple], workers: int) -> None:
        """train_keys: (algorithm, feature_set, train_n_malware, seed)."""
        by_dataset: dict[tuple, list[str]] = {}
        for algorithm, feature_set, n, seed in train_keys:
            by_dataset.setdefault((feature_set, n, seed), []).append(algorithm)

        def job(dataset_key):
            feature_set, n, seed = dataset_key
            algorithms = by_dataset[dataset_key]
            loaded = {}
            todo = []
            for algorithm in algorithms:
                path = self._model_path(algorithm, n, feature_set, seed)
                if path and os.path.exists(path):
                    loaded[algorithm] = learn.load_model(path)
                else:
                    todo.append(algorithm)
            if todo:
                X, y, _ = self._materialize("train", n, 1, feature_set, seed)
                for algorithm in todo:
                    model = learn.train(algorithm, X, y, seed,
                                        self.hyperparams.get(algorithm))
                    path = self._model_path(algorithm, n, feature_set, seed)
                    if path:
                        learn.save_model(model, path)
                    loaded[algorithm] = model
            return dataset_key, loaded

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(job, sorted(by_dataset)))
        else:
            results = [job(k) for k in sorted(by_dataset)]
        for (feature_set, n, seed), models in results:
            for algorithm, model in models.items():
                self.models[(algorithm, feature_set, n, seed)] = model

    def _model_path(self, algorithm, n, feature_set, seed):
        if self.model_dir is None:
            return None
        name = model_filename(algorithm, n, 1, feature_set, seed) + ".model"
        return os.path.join(self.model_dir, name)

    def evaluate_runs(self, runs: list[RunSpec], workers: int) -> list[dict]:
        by_dataset: dict[tuple, list[RunSpec]] = {}
        for run in runs:
            key = (run.test_n_malware, run.test_benign_ratio,
                   run.feature_set, run.seed)
            by_dataset.setdefault(key, []).append(run)

        def job(dataset_key):
            n, ratio, feature_set, seed = dataset_key
            X, y, _ = self._materialize("test", n, ratio, feature_set, seed)
            out = {}
            for run in by_dataset[dataset_key]:
                out[run.key] = self._observe(run, X, y)
            return out

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                chunks = list(pool.map(job, sorted(by_dataset)))
        else:
            chunks = [job(k) for k in sorted(by_dataset)]
        merged = {}
        for chunk in chunks:
            merged.update(chunk)
        return [merged[run.key] for run in runs]

    def _observe(self, run: RunSpec, X, y) -> dict:
        row = {
            "question": run.question,
            "algorithm": run.algorithm,
            "feature_set": run.feature_set,
            "train_set_size": run.train_set_size,
            "test_set_size": run.test_set_size,
            "test_set_ratio": run.test_set_ratio,
            "perf_measure": run.perf_measure,
            "performance": None,
            "other_info": None,
            "seed": run.seed,
        }
        model = self.models[(run.algorithm, run.feature_set,
                             run.train_n_malware, run.seed)]
        try:
            if run.perf_measure == "accuracy":
                row["performance"] = evaluate.accuracy(y, model.predict(X))
            elif run.perf_measure == "AUC":
                if run.algorithm == "SVM":
                    pass  # scores unavailable; performance stays empty
                else:
                    row["performance"] = evaluate.auc(
                        evaluate.roc_curve(y, model.score(X)))
            elif run.perf_measure == "real-life":
                if run.algorithm == "SVM":
                    point = evaluate.hard_label_operating_point(
                        y, model.predict(X))
                else:
                    point = evaluate.recall_at_fpr(
                        evaluate.roc_curve(y, model.score(X)),
                        self.target_fpr)
                row["performance"] = point.recall
                row["other_info"] = point.achieved_fpr
            else:
                raise ValueError(f"unknown measure {run.perf_measure!r}")
        except MalbenchError as exc:
            row["performance"] = None
            row["other_info"] = f"error: {exc}"
        return row


def _read_existing(path: str) -> dict[tuple, dict]:
    existing = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["question"], row["algorithm"], row["feature_set"],
                   row["train_set_size"], row["test_set_ratio"],
                   row["perf_measure"], row["seed"])
            existing[key] = row
    return existing


def execute(runs: list[RunSpec], manifest: FragmentManifest, pools: Pools,
            out_path: str, resume: bool = False, workers: int | None = None,
            target_fpr: float = DEFAULT_TARGET_FPR,
            hyperparams: dict | None = None,
            model_dir: str | None = None) -> str:
    """Run the plan and write the results CSV in plan order.

    With resume=True, observations already present in out_path (matched
    by key) are carried over verbatim and not recomputed.
    """
    if not runs:
        raise InvalidLevels("empty plan")
    workers = workers or os.cpu_count() or 1
    check_pool_capacity(runs, pools)
    if model_dir:
        os.makedirs(model_dir, exist_ok=True)

    existing = {}
    if resume and os.path.exists(out_path):
        existing = _read_existing(out_path)
    pending = [run for run in runs if run.key not in existing]

    executor = _Executor(manifest, pools, target_fpr, hyperparams, model_dir)
    rows_by_key: dict[tuple, dict] = {}
    if pending:
        train_keys = sorted({(r.algorithm, r.feature_set, r.train_n_malware,
                              r.seed) for r in pending})
        executor.train_models(train_keys, workers)
        for run, row in zip(pending, executor.evaluate_runs(pending, workers)):
            rows_by_key[run.key] = {k: _format_cell(v) for k, v in row.items()}

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULTS_COLUMNS,
                                lineterminator="\n")
        writer.writeheader()
        for run in runs:
            row = existing.get(run.key) or rows_by_key[run.key]
            writer.writerow({k: row.get(k, "") for k in RESULTS_COLUMNS})
    return out_path


def run_experiment(config: ExperimentConfig, manifest: FragmentManifest,
                   index: pd.DataFrame, out_path: str, resume: bool = False,
                   workers: int | None = None,
                   model_dir: str | None = None) -> str:
    """Plan from config, partition pools from the metadata index, execute."""
    from .sample import partition_pools

    runs = plan(config)
    pools = partition_pools(index, config.split_config())
    return execute(runs, manifest, pools, out_path, resume=resume,
                   workers=workers, target_fpr=config.target_fpr,
                   hyperparams=config.hyperparams, model_dir=model_dir)
