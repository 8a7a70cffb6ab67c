"""Detector performance measures: accuracy, ROC/AUC, recall at a target
false-positive rate, and the hard-label fallback used for SVM.

The hard-label operating point divides false positives by the total
sample count rather than the negative count; that is a deliberate,
documented quirk carried over from the measurement code this pipeline
reproduces. The standard FP/negatives rate is exposed separately for
diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, LengthMismatch, NoPositives, SingleClass


@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


@dataclass
class OperatingPoint:
    recall: float
    achieved_fpr: float


def _paired(y, other, other_name):
    y = np.asarray(y)
    other = np.asarray(other)
    if len(y) != len(other):
        raise LengthMismatch(
            f"y has {len(y)} entries, {other_name} has {len(other)}")
    if len(y) == 0:
        raise EmptyInput("no samples")
    return y, other


def accuracy(y, yhat) -> float:
    y, yhat = _paired(y, yhat, "yhat")
    return float(np.mean(y == yhat))


def roc_curve(y, scores) -> RocCurve:
    """Full ROC curve (no intermediate points dropped).

    Thresholds are the distinct score values in descending order with a
    leading sentinel above the maximum; at threshold t the point is
    (FP(score >= t)/N, TP(score >= t)/P). Tied scores share one point.
    """
    y, scores = _paired(y, scores, "scores")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    pos = int(np.sum(y == 1))
    neg = int(np.sum(y == 0))
    if pos == 0 or neg == 0:
        raise SingleClass("ROC needs both classes present")

    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_y = y[order]

    tp = np.cumsum(sorted_y == 1)
    fp = np.cumsum(sorted_y == 0)
    # Last index of each run of tied scores.
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    cut = np.append(distinct, len(sorted_scores) - 1)

    tpr = np.concatenate(([0.0], tp[cut] / pos))
    fpr = np.concatenate(([0.0], fp[cut] / neg))
    thresholds = np.concatenate(([sorted_scores[0] + 1.0], sorted_scores[cut]))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the (fpr, tpr) curve."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def recall_at_fpr(curve: RocCurve, target: float = 0.01) -> OperatingPoint:
    """Recall at the first curve point with FPR >= target.

    The achieved FPR may overshoot the target for coarse score
    distributions; it is reported alongside the recall.
    """
    if not 0.0 < target < 1.0:
        raise ValueError("target FPR must be in (0,1)")
    i = int(np.argmax(curve.fpr >= target))
    return OperatingPoint(recall=float(curve.tpr[i]),
                          achieved_fpr=float(curve.fpr[i]))


def hard_label_operating_point(y, yhat) -> OperatingPoint:
    """Operating point from hard predictions (the SVM path).

    recall = TP/P; achieved_fpr = FP / total samples (not FP/N).
    """
    y, yhat = _paired(y, yhat, "yhat")
    pos = int(np.sum(y == 1))
    if pos == 0:
        raise NoPositives("recall undefined without positive samples")
    tp = int(np.sum((y == 1) & (yhat == 1)))
    fp = int(np.sum((y == 0) & (yhat == 1)))
    return OperatingPoint(recall=tp / pos, achieved_fpr=fp / len(y))


def standard_false_positive_rate(y, yhat) -> float:
    """Diagnostic FP/negatives rate (the textbook definition)."""
    y, yhat = _paired(y, yhat, "yhat")
    neg = int(np.sum(y == 0))
    if neg == 0:
        raise EmptyInput("no negative samples")
    fp = int(np.sum((y == 0) & (yhat == 1)))
    return fp / neg
