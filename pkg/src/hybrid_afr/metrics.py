"""Per-face classification scores from a confusion matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument, NoData
from .taxonomy import N_CLASSES, label_name


class ConfusionMatrix:
    """Counts indexed [true class, predicted class]."""

    def __init__(self, n_classes: int = N_CLASSES, counts: Optional[np.ndarray] = None):
        self.n = int(n_classes)
        if counts is None:
            self.counts = np.zeros((self.n, self.n), dtype=np.int64)
        else:
            c = np.asarray(counts)
            if c.shape != (self.n, self.n) or np.any(c < 0) or not np.issubdtype(c.dtype, np.integer):
                raise InvalidArgument("counts must be a square nonnegative integer matrix")
            self.counts = c.astype(np.int64).copy()

    def _check(self, c) -> int:
        if isinstance(c, (bool, np.bool_)):
            raise InvalidArgument(f"class {c!r} out of range")
        ci = int(c)
        if ci != c or not 0 <= ci < self.n:
            raise InvalidArgument(f"class {c!r} out of range")
        return ci

    def accumulate(self, truth, prediction) -> "ConfusionMatrix":
        self.counts[self._check(truth), self._check(prediction)] += 1
        return self

    def update(self, truths: Sequence, predictions: Sequence) -> "ConfusionMatrix":
        t = np.asarray(truths, dtype=np.int64).ravel()
        p = np.asarray(predictions, dtype=np.int64).ravel()
        if t.shape != p.shape:
            raise InvalidArgument("truth and prediction lengths differ")
        if t.size and (t.min() < 0 or p.min() < 0 or t.max() >= self.n or p.max() >= self.n):
            raise InvalidArgument("class out of range")
        np.add.at(self.counts, (t, p), 1)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.n != self.n:
            raise InvalidArgument("matrices differ in size")
        return ConfusionMatrix(self.n, self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassScores:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / (self.tp + self.tn + self.fp + self.fn)

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class Scores:
    per_class: dict[int, ClassScores]
    accuracy: float  # fraction of faces classified correctly
    precision: float  # macro averages over classes with support
    recall: float
    f1: float
    macro_accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    absent: tuple[int, ...]


def one_vs_rest(cm: ConfusionMatrix, c: int) -> ClassScores:
    C = cm.counts
    tp = int(C[c, c])
    fn = int(C[c, :].sum()) - tp
    fp = int(C[:, c].sum()) - tp
    return ClassScores(tp, fp, fn, cm.total - tp - fn - fp)


def scores(cm: ConfusionMatrix) -> Scores:
    total = cm.total
    if total == 0:
        raise NoData("confusion matrix is empty")
    per = {c: one_vs_rest(cm, c) for c in range(cm.n)}
    present = [c for c in range(cm.n) if per[c].support > 0]
    absent = tuple(c for c in range(cm.n) if per[c].support == 0)

    def macro(attr: str) -> float:
        return float(sum(getattr(per[c], attr) for c in present) / len(present))

    tp = sum(per[c].tp for c in range(cm.n))
    fp = sum(per[c].fp for c in range(cm.n))
    fn = sum(per[c].fn for c in range(cm.n))
    mp = tp / (tp + fp) if tp + fp else 0.0
    mr = tp / (tp + fn) if tp + fn else 0.0
    mf = 2 * mp * mr / (mp + mr) if mp + mr else 0.0
    return Scores(
        per, int(np.trace(cm.counts)) / total, macro("precision"), macro("recall"), macro("f1"),
        macro("accuracy"), mp, mr, mf, absent,
    )


def report(cm: ConfusionMatrix, title: str = "Test set") -> str:
    """Summary table (values in %) followed by a per-class breakdown."""
    s = scores(cm)
    out = [f"{title}: {cm.total} faces", f"{'Metric':<10}{'Value (%)':>10}"]
    for name, val in (("Accuracy", s.accuracy), ("Precision", s.precision), ("Recall", s.recall), ("F1", s.f1)):
        out.append(f"{name:<10}{100 * val:>10.2f}")
    out.append(f"micro P/R/F1 (%): {100 * s.micro_precision:.2f} / {100 * s.micro_recall:.2f} / {100 * s.micro_f1:.2f}")
    out.append("")
    out.append(f"{'Class':<44}{'Support':>8}{'P':>8}{'R':>8}{'F1':>8}")
    for c in range(cm.n):
        cs = s.per_class[c]
        name = label_name(c) if cm.n == N_CLASSES else str(c)
        if cs.support == 0:
            out.append(f"{name:<44}{0:>8}{'absent':>24}")
        else:
            out.append(f"{name:<44}{cs.support:>8}{100 * cs.precision:>8.2f}{100 * cs.recall:>8.2f}{100 * cs.f1:>8.2f}")
    return "\n".join(out) + "\n"
