"""Confusion matrices, precision/recall and macro averages.

Per-class scores are tp/(tp+fp) and tp/(tp+fn) computed exactly from the
integer confusion counts. When a denominator is zero the score is reported
as 0.0 together with a defined=False flag rather than dropped, so sweep
series stay rectangular.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument


@dataclass
class ConfusionMatrix:
    classes: list[int]            # sorted codes
    counts: np.ndarray            # (C, C) int64; [i, j] = true i predicted j

    def __post_init__(self):
        self.classes = [int(c) for c in self.classes]
        self.counts = np.asarray(self.counts, dtype=np.int64)
        C = len(self.classes)
        if self.counts.shape != (C, C):
            raise InvalidArgument(f"counts shape {self.counts.shape} != ({C}, {C})")
        if (self.counts < 0).any():
            raise InvalidArgument("confusion counts must be nonnegative")

    def index_of(self, code: int) -> int:
        try:
            return self.classes.index(int(code))
        except ValueError:
            raise InvalidArgument(
                f"class {code} not among {self.classes}") from None

    def tp(self, code: int) -> int:
        i = self.index_of(code)
        return int(self.counts[i, i])

    def fp(self, code: int) -> int:
        i = self.index_of(code)
        return int(self.counts[:, i].sum() - self.counts[i, i])

    def fn(self, code: int) -> int:
        i = self.index_of(code)
        return int(self.counts[i, :].sum() - self.counts[i, i])

    def support(self, code: int) -> int:
        return int(self.counts[self.index_of(code), :].sum())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_dict(self) -> dict:
        return {"classes": self.classes, "counts": self.counts.tolist()}


@dataclass
class PerClassScore:
    precision: float
    recall: float
    support: int
    precision_defined: bool = True
    recall_defined: bool = True

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "support": self.support,
                "precision_defined": self.precision_defined,
                "recall_defined": self.recall_defined}


@dataclass
class ScoreReport:
    per_class: dict[int, PerClassScore]
    macro_precision: float
    macro_recall: float
    included_classes: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "per_class": {str(k): v.to_dict() for k, v in self.per_class.items()},
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "included_classes": self.included_classes,
        }


def confusion_matrix(truths, preds, classes) -> ConfusionMatrix:
    truths = np.asarray(truths, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    if truths.shape != preds.shape:
        raise InvalidArgument(
            f"truths ({truths.shape}) and preds ({preds.shape}) differ in length")
    cls = sorted(int(c) for c in classes)
    class_arr = np.array(cls, dtype=np.int64)
    if not np.isin(truths, class_arr).all() or not np.isin(preds, class_arr).all():
        raise InvalidArgument("labels outside the declared class list")
    ti = np.searchsorted(class_arr, truths)
    pi = np.searchsorted(class_arr, preds)
    counts = np.zeros((len(cls), len(cls)), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return ConfusionMatrix(classes=cls, counts=counts)


def precision(cm: ConfusionMatrix, code: int) -> float:
    """tp / (tp + fp); 0.0 when the class was never predicted."""
    tp = cm.tp(code)
    denom = tp + cm.fp(code)
    return tp / denom if denom else 0.0


def recall(cm: ConfusionMatrix, code: int) -> float:
    """tp / (tp + fn); 0.0 when the class has no true rows."""
    tp = cm.tp(code)
    denom = tp + cm.fn(code)
    return tp / denom if denom else 0.0


def macro_scores(cm: ConfusionMatrix,
                 include_classes: list[int] | None = None) -> ScoreReport:
    """Unweighted mean of per-class precision/recall over include_classes."""
    include = cm.classes if include_classes is None else \
        sorted(int(c) for c in include_classes)
    if not include:
        raise InvalidArgument("include_classes must be non-empty")
    per_class = {}
    for code in include:
        tp = cm.tp(code)
        p_den = tp + cm.fp(code)
        r_den = tp + cm.fn(code)
        per_class[code] = PerClassScore(
            precision=tp / p_den if p_den else 0.0,
            recall=tp / r_den if r_den else 0.0,
            support=cm.support(code),
            precision_defined=p_den > 0,
            recall_defined=r_den > 0)
    macro_p = sum(s.precision for s in per_class.values()) / len(include)
    macro_r = sum(s.recall for s in per_class.values()) / len(include)
    return ScoreReport(per_class=per_class, macro_precision=macro_p,
                       macro_recall=macro_r, included_classes=include)
