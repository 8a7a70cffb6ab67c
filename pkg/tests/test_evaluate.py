import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from malbench import evaluate
from malbench.errors import (
    EmptyInput,
    LengthMismatch,
    NoPositives,
    SingleClass,
)


def test_accuracy_basic():
    assert evaluate.accuracy([0, 1, 1, 0], [0, 1, 0, 0]) == 0.75
    assert evaluate.accuracy([1], [1]) == 1.0


def test_accuracy_errors():
    with pytest.raises(LengthMismatch):
        evaluate.accuracy([0, 1], [0])
    with pytest.raises(EmptyInput):
        evaluate.accuracy([], [])


def test_roc_perfect_separation():
    y = np.array([0, 0, 1, 1])
    s = np.array([0.1, 0.2, 0.8, 0.9])
    curve = evaluate.roc_curve(y, s)
    np.testing.assert_allclose(curve.fpr, [0, 0, 0, 0.5, 1])
    np.testing.assert_allclose(curve.tpr, [0, 0.5, 1, 1, 1])
    assert curve.thresholds[0] == pytest.approx(1.9)
    assert evaluate.auc(curve) == pytest.approx(1.0)


def test_roc_reversed_scores():
    y = np.array([0, 0, 1, 1])
    s = np.array([0.9, 0.8, 0.2, 0.1])
    assert evaluate.auc(evaluate.roc_curve(y, s)) == pytest.approx(0.0)


def test_roc_ties_share_one_point():
    y = np.array([0, 1, 0, 1])
    s = np.array([0.5, 0.5, 0.5, 0.5])
    curve = evaluate.roc_curve(y, s)
    np.testing.assert_allclose(curve.fpr, [0, 1])
    np.testing.assert_allclose(curve.tpr, [0, 1])
    assert evaluate.auc(curve) == pytest.approx(0.5)


def test_roc_single_class_raises():
    with pytest.raises(SingleClass):
        evaluate.roc_curve([1, 1], [0.1, 0.2])


def _wilcoxon_auc(y, s):
    # All-pairs oracle: P(score_pos > score_neg) + 0.5 P(tie).
    pos = s[y == 1]
    neg = s[y == 0]
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def test_auc_matches_all_pairs_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(10, 200))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            continue
        s = np.round(rng.random(n), 2)  # coarse scores force ties
        got = evaluate.auc(evaluate.roc_curve(y, s))
        assert got == pytest.approx(_wilcoxon_auc(y, s), abs=1e-12)


def test_recall_at_fpr_first_crossing():
    y = np.array([0] * 4 + [1] * 4)
    s = np.array([0.1, 0.2, 0.3, 0.9, 0.5, 0.6, 0.7, 0.8])
    point = evaluate.recall_at_fpr(evaluate.roc_curve(y, s), 0.2)
    # First point with fpr >= 0.2 is fpr = 0.25 (one FP), all 4 TPs below.
    assert point.achieved_fpr == pytest.approx(0.25)
    assert point.recall == pytest.approx(0.0)


def test_recall_at_fpr_validates_target():
    y = np.array([0, 1])
    curve = evaluate.roc_curve(y, np.array([0.1, 0.9]))
    for bad in (0.0, 1.0, -0.5):
        with pytest.raises(ValueError):
            evaluate.recall_at_fpr(curve, bad)


def test_hard_label_operating_point():
    y = np.array([1, 1, 0, 0])
    yhat = np.array([1, 1, 1, 0])
    point = evaluate.hard_label_operating_point(y, yhat)
    assert point.recall == pytest.approx(1.0)
    # Deliberate quirk: FP over all samples, not over negatives.
    assert point.achieved_fpr == pytest.approx(0.25)
    assert evaluate.standard_false_positive_rate(y, yhat) == pytest.approx(0.5)


def test_hard_label_no_positives():
    with pytest.raises(NoPositives):
        evaluate.hard_label_operating_point([0, 0], [0, 1])


@st.composite
def labeled_scores(draw):
    n = draw(st.integers(min_value=4, max_value=60))
    y = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if 1 not in y:
        y[0] = 1
    if 0 not in y:
        y[1] = 0
    s = draw(st.lists(
        st.floats(min_value=-5, max_value=5, allow_nan=False,
                  allow_infinity=False),
        min_size=n, max_size=n))
    return np.array(y), np.array(s)


@settings(max_examples=60, deadline=None)
@given(labeled_scores())
def test_roc_monotone_property(data):
    y, s = data
    curve = evaluate.roc_curve(y, s)
    assert (np.diff(curve.fpr) >= 0).all()
    assert (np.diff(curve.tpr) >= 0).all()
    assert curve.fpr[0] == 0 and curve.tpr[0] == 0
    assert curve.fpr[-1] == 1 and curve.tpr[-1] == 1
    assert (np.diff(curve.thresholds) < 0).all()
    area = evaluate.auc(curve)
    assert -1e-12 <= area <= 1 + 1e-12


@settings(max_examples=60, deadline=None)
@given(labeled_scores())
def test_auc_invariant_under_monotone_transform(data):
    y, s = data
    # Coarse scores keep tie structure intact under the affine transform;
    # with arbitrary floats, sub-epsilon gaps could collapse into ties.
    s = np.round(s, 2)
    a = evaluate.auc(evaluate.roc_curve(y, s))
    b = evaluate.auc(evaluate.roc_curve(y, 3.0 * s + 7.0))
    assert a == pytest.approx(b, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(labeled_scores())
def test_auc_matches_wilcoxon_property(data):
    y, s = data
    got = evaluate.auc(evaluate.roc_curve(y, s))
    assert got == pytest.approx(_wilcoxon_auc(y, s), abs=1e-12)
