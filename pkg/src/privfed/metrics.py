"""Binary classification metrics with label 1 as the positive class."""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, LengthMismatch


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> ConfusionCounts:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise LengthMismatch(f"y_true has {t.size} labels, y_pred has {p.size}")
    if t.size == 0:
        raise EmptyInput("no labels to compare")
    if not (np.isin(t, (0, 1)).all() and np.isin(p, (0, 1)).all()):
        raise ValueError("labels must be 0 or 1")
    return ConfusionCounts(
        tp=int(((t == 1) & (p == 1)).sum()),
        fp=int(((t == 0) & (p == 1)).sum()),
        tn=int(((t == 0) & (p == 0)).sum()),
        fn=int(((t == 1) & (p == 0)).sum()),
    )


def accuracy(c: ConfusionCounts) -> float:
    return (c.tp + c.tn) / c.total


def f1(c: ConfusionCounts) -> float:
    """2tp / (2tp + fp + fn); 0 when there are no positives at all."""
    denom = 2 * c.tp + c.fp + c.fn
    return 0.0 if denom == 0 else 2 * c.tp / denom


def f1_degenerate(c: ConfusionCounts) -> bool:
    return 2 * c.tp + c.fp + c.fn == 0


def score(y_true, y_pred) -> tuple[float, float, bool]:
    """(accuracy, f1, f1_was_degenerate)."""
    c = confusion(y_true, y_pred)
    return accuracy(c), f1(c), f1_degenerate(c)
