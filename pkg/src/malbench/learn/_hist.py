"""Histogram kernels for leaf-wise gradient-boosted trees.

Features are pre-binned into at most max_bins per-feature quantile bins;
per-leaf gradient/hessian histograms are laid out CSR-style (per-feature
offsets into flat arrays) so features with few distinct values cost only
their actual bin count."""

from __future__ import annotations

import numpy as np
from numba import njit


def make_bins(X: np.ndarray, max_bins: int = 255):
    """Per-feature bin upper edges; bin of x = count of edges <= x."""
    edges = []
    for j in range(X.shape[1]):
        col = X[:, j]
        uniq = np.unique(col)
        if len(uniq) <= max_bins:
            e = (uniq[:-1] + uniq[1:]) / 2.0
        else:
            qs = np.quantile(col, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
            e = np.unique(qs)
        edges.append(e.astype(np.float64))
    return edges


def bin_matrix(X: np.ndarray, edges: list) -> tuple[np.ndarray, np.ndarray]:
    """Bin X into uint8 codes; also return per-feature bin counts."""
    n, f = X.shape
    Xb = np.empty((n, f), dtype=np.uint8)
    n_bins = np.empty(f, dtype=np.int64)
    for j in range(f):
        Xb[:, j] = np.searchsorted(edges[j], X[:, j], side="right")
        n_bins[j] = len(edges[j]) + 1
    return Xb, n_bins


@njit(cache=True)
def build_histograms(Xb, idx, grad, hess, offsets, total_bins):
    hg = np.zeros(total_bins, dtype=np.float64)
    hh = np.zeros(total_bins, dtype=np.float64)
    hc = np.zeros(total_bins, dtype=np.int64)
    f = Xb.shape[1]
    for t in range(len(idx)):
        i = idx[t]
        g = grad[i]
        h = hess[i]
        for j in range(f):
            pos = offsets[j] + Xb[i, j]
            hg[pos] += g
            hh[pos] += h
            hc[pos] += 1
    return hg, hh, hc


@njit(cache=True)
def best_histogram_split(hg, hh, hc, offsets, n_bins,
                         min_child_samples, min_sum_hessian):
    """Best gain split over all features of one leaf's histograms.

    Gain is the standard second-order objective reduction with zero L2
    penalty. Returns (found, feature, bin_threshold, gain); the split
    sends bin <= bin_threshold left. Ties keep the lowest feature, then
    the lowest bin."""
    n_features = len(n_bins)
    g_total = 0.0
    h_total = 0.0
    c_total = 0
    for b in range(n_bins[0]):
        g_total += hg[offsets[0] + b]
        h_total += hh[offsets[0] + b]
        c_total += hc[offsets[0] + b]

    best_found = False
    best_feat = -1
    best_bin = -1
    best_gain = 0.0
    parent_term = (g_total * g_total) / h_total if h_total > 0 else 0.0

    for j in range(n_features):
        gl = 0.0
        hl = 0.0
        cl = 0
        off = offsets[j]
        for b in range(n_bins[j] - 1):
            gl += hg[off + b]
            hl += hh[off + b]
            cl += hc[off + b]
            cr = c_total - cl
            if cl < min_child_samples:
                continue
            if cr < min_child_samples:
                break
            hr = h_total - hl
            if hl < min_sum_hessian or hr < min_sum_hessian:
                continue
            gr = g_total - gl
            gain = gl * gl / hl + gr * gr / hr - parent_term
            if gain > best_gain:
                best_gain = gain
                best_feat = j
                best_bin = b
                best_found = True
    return best_found, best_feat, best_bin, best_gain
