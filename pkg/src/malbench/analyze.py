"""Statistical post-processing of experiment observations.

Works on the results table produced by the orchestrator: Pearson
correlation of performance against training-set size per algorithm,
repeated one-at-a-time sensitivity deltas over doubling size levels, and
ordinary-least-squares trend fits over the doubling index.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from .errors import DegenerateX, NonDoublingLevels, ZeroVariance

RESULTS_COLUMNS = [
    "question", "algorithm", "feature_set", "train_set_size",
    "test_set_size", "test_set_ratio", "perf_measure", "performance",
    "other_info", "seed",
]


def load_observations(path: str) -> pd.DataFrame:
    obs = pd.read_csv(path, dtype={"test_set_ratio": str})
    missing = [c for c in RESULTS_COLUMNS if c not in obs.columns]
    if missing:
        raise ValueError(f"results file lacks columns: {missing}")
    return obs


def pearson(x, y) -> float:
    """Product-moment correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y) or len(x) < 2:
        raise ValueError("need two equal-length series of length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    vx = np.sum(dx * dx)
    vy = np.sum(dy * dy)
    if vx == 0.0 or vy == 0.0:
        raise ZeroVariance("correlation undefined for a constant series")
    return float(np.sum(dx * dy) / np.sqrt(vx * vy))


def correlation_table(obs: pd.DataFrame, question: int,
                      perf_measure: str) -> dict[str, float]:
    """Per-algorithm Pearson r of performance vs train_set_size.

    Feature sets and seeds are pooled within each algorithm group.
    """
    subset = obs[(obs["question"] == question)
                 & (obs["perf_measure"] == perf_measure)]
    table = {}
    for algorithm, group in subset.groupby("algorithm", sort=True):
        sizes = group["train_set_size"].to_numpy(dtype=np.float64)
        if len(np.unique(sizes)) < 2:
            raise ZeroVariance(
                f"algorithm {algorithm}: needs >= 2 distinct sizes")
        table[str(algorithm)] = pearson(sizes,
                                        group["performance"].to_numpy())
    return table


def oat_sensitivities(series, relative: bool = False) -> list[tuple]:
    """Per-doubling performance deltas for one one-at-a-time slice.

    series: (size, performance) pairs sorted by size, sizes forming a
    doubling chain. Returns (level, delta) pairs where delta is
    perf(2*level) - perf(level); with relative=True the delta is divided
    by perf(level).
    """
    sizes = [s for s, _ in series]
    perfs = [p for _, p in series]
    if len(series) < 2:
        raise NonDoublingLevels("need at least two levels")
    for a, b in zip(sizes, sizes[1:]):
        if b != 2 * a:
            raise NonDoublingLevels(f"{b} is not double {a}")
    out = []
    for i in range(len(series) - 1):
        delta = perfs[i + 1] - perfs[i]
        if relative:
            delta /= perfs[i]
        out.append((sizes[i], delta))
    return out


def sensitivity_table(obs: pd.DataFrame, question: int, perf_measure: str,
                      relative: bool = False) -> pd.DataFrame:
    """Repeated OAT: deltas computed independently per
    (algorithm, feature_set, seed) slice, then pooled."""
    subset = obs[(obs["question"] == question)
                 & (obs["perf_measure"] == perf_measure)]
    rows = []
    keys = ["algorithm", "feature_set", "seed"]
    for (algorithm, feature_set, seed), group in subset.groupby(keys,
                                                                sort=True):
        series = (group.sort_values("train_set_size")
                  [["train_set_size", "performance"]].to_numpy())
        for level, delta in oat_sensitivities(list(map(tuple, series)),
                                              relative=relative):
            rows.append({"algorithm": algorithm, "feature_set": feature_set,
                         "seed": seed, "level": int(level), "delta": delta})
    return pd.DataFrame(rows,
                        columns=["algorithm", "feature_set", "seed",
                                 "level", "delta"])


def fit_linear(points) -> tuple[float, float]:
    """Ordinary least squares (slope, intercept) for (x, y) pairs."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or len(np.unique(pts[:, 0])) < 2:
        raise DegenerateX("need at least two distinct x values")
    x, y = pts[:, 0], pts[:, 1]
    dx = x - x.mean()
    slope = float(np.sum(dx * (y - y.mean())) / np.sum(dx * dx))
    intercept = float(y.mean() - slope * x.mean())
    return slope, intercept


def sensitivity_fit(table: pd.DataFrame) -> tuple[float, float]:
    """Trend of sensitivity deltas over the doubling index (log2 size)."""
    points = np.column_stack([np.log2(table["level"].to_numpy(float)),
                              table["delta"].to_numpy(float)])
    return fit_linear(points)
