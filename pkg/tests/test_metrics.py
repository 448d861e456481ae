import numpy as np
import pytest
from conftest import brute_scores, pairs_from_counts
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_afr.errors import InvalidArgument, NoData
from hybrid_afr.metrics import ConfusionMatrix, report, scores


def test_accumulate():
    cm = ConfusionMatrix()
    cm.accumulate(3, 3).accumulate(3, 5)
    assert cm.counts[3, 3] == 1 and cm.counts[3, 5] == 1 and cm.total == 2
    for bad in (-1, 30, 2.5, True):
        with pytest.raises(InvalidArgument):
            cm.accumulate(bad, 0)
    with pytest.raises(InvalidArgument):
        cm.update([1, 2], [3])
    with pytest.raises(InvalidArgument):
        cm.update([1, 30], [3, 3])


def test_two_class_hand_values():
    s = scores(ConfusionMatrix(2, np.array([[8, 2], [1, 9]])))
    c0 = s.per_class[0]
    assert (c0.tp, c0.fp, c0.fn, c0.tn) == (8, 1, 2, 9)
    assert c0.precision == 8 / 9
    assert c0.recall == 0.8
    assert c0.f1 == pytest.approx(2 * (8 / 9 * 0.8) / (8 / 9 + 0.8), rel=1e-15)
    assert s.accuracy == 17 / 20


def test_perfect_diagonal():
    s = scores(ConfusionMatrix(counts=np.diag(np.arange(1, 31))))
    assert (s.accuracy, s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0, 1.0)
    assert s.absent == ()


def test_empty_is_no_data():
    with pytest.raises(NoData):
        scores(ConfusionMatrix())


def test_absent_classes_excluded():
    counts = np.zeros((30, 30), int)
    counts[0, 0], counts[1, 1], counts[1, 0] = 5, 3, 1
    s = scores(ConfusionMatrix(counts=counts))
    assert len(s.absent) == 28 and 0 not in s.absent
    assert s.recall == (1.0 + 0.75) / 2


def test_merge_is_elementwise_sum():
    rng = np.random.default_rng(0)
    a, b = rng.integers(0, 5, (30, 30)), rng.integers(0, 5, (30, 30))
    merged = ConfusionMatrix(counts=a).merge(ConfusionMatrix(counts=b))
    assert np.array_equal(merged.counts, a + b)


def random_counts(seed, n):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 6, (n, n)) * (rng.random((n, n)) < 0.4)
    counts[rng.integers(n), rng.integers(n)] += 1
    return counts


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_matches_brute_force(seed, n):
    counts = random_counts(seed, n)
    pairs = pairs_from_counts(counts)
    cm = ConfusionMatrix(n)
    cm.update([t for t, _ in pairs], [p for _, p in pairs])
    assert np.array_equal(cm.counts, counts)
    s = scores(cm)
    per, macro, acc = brute_scores(pairs, n)
    for c in range(n):
        got = s.per_class[c]
        assert (got.tp, got.fp, got.fn, got.tn) == tuple(per[c][k] for k in ("tp", "fp", "fn", "tn"))
        assert (got.precision, got.recall, got.f1) == (per[c]["precision"], per[c]["recall"], per[c]["f1"])
    assert (s.precision, s.recall, s.f1) == (macro["precision"], macro["recall"], macro["f1"])
    assert s.accuracy == acc


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_f1_between_precision_and_recall(seed):
    s = scores(ConfusionMatrix(6, random_counts(seed, 6)))
    for cs in s.per_class.values():
        if cs.tp:
            assert min(cs.precision, cs.recall) - 1e-15 <= cs.f1 <= max(cs.precision, cs.recall) + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_label_permutation_invariance(seed):
    counts = random_counts(seed, 7)
    perm = np.random.default_rng(seed).permutation(7)
    moved = np.zeros_like(counts)
    moved[np.ix_(perm, perm)] = counts
    a, b = scores(ConfusionMatrix(7, counts)), scores(ConfusionMatrix(7, moved))
    for k in ("accuracy", "precision", "recall", "f1"):
        assert getattr(b, k) == pytest.approx(getattr(a, k), rel=1e-12)


def test_report_shape():
    counts = np.zeros((30, 30), int)
    counts[12, 12], counts[29, 29], counts[12, 29] = 9, 10, 1
    text = report(ConfusionMatrix(counts=counts))
    lines = text.splitlines()
    assert lines[0] == "Test set: 20 faces"
    assert lines[2].startswith("Accuracy") and lines[2].endswith("95.00")
    assert sum("absent" in l for l in lines) == 28
