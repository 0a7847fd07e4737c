"""Frame-level evaluation metrics over a set of predicted videos.

Accuracy is computed over every frame of every video. Precision, recall,
and F1 are computed only over videos whose ground truth contains both
classes: a video that is all-film or all-intro can only contribute trivial
or degenerate positives, so it is excluded from those three (but still
counts toward accuracy). Undefined ratios are reported as None, never 0.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn

    def add(self, other):
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.tn += other.tn

    @staticmethod
    def from_pair(truth, pred):
        truth = np.asarray(truth)
        pred = np.asarray(pred)
        if truth.shape != pred.shape or truth.ndim != 1 or truth.size == 0:
            raise ContractError("truth and prediction must be equal-length 1-D arrays")
        for name, arr in (("truth", truth), ("prediction", pred)):
            vals = np.unique(arr)
            if not np.isin(vals, (0, 1)).all():
                raise ContractError(f"{name} labels must be binary, got values {vals}")
        t = truth.astype(bool)
        p = pred.astype(bool)
        return ConfusionCounts(
            tp=int((t & p).sum()), fp=int((~t & p).sum()),
            fn=int((t & ~p).sum()), tn=int((~t & ~p).sum()),
        )


def _ratio(num, den):
    return num / den if den > 0 else None


@dataclass
class MetricsReport:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    n_videos: int
    n_excluded: int
    confusion_all: ConfusionCounts
    confusion_scored: ConfusionCounts

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_videos": self.n_videos,
            "n_excluded": self.n_excluded,
            "confusion_all": vars(self.confusion_all).copy(),
            "confusion_scored": vars(self.confusion_scored).copy(),
        }

    def summary(self):
        def pct(x):
            return "n/a" if x is None else f"{100.0 * x:.1f}%"

        return (
            f"Accuracy: {pct(self.accuracy)}  Precision: {pct(self.precision)}  "
            f"Recall: {pct(self.recall)}  F1: {pct(self.f1)}  "
            f"({self.n_videos} videos, {self.n_excluded} excluded from P/R/F1)"
        )


def score(pairs):
    """MetricsReport for [(truth, prediction), ...], one entry per video.

    Micro-averaged: counts are pooled across videos before taking ratios.
    """
    pairs = list(pairs)
    if not pairs:
        raise ContractError("need at least one (truth, prediction) pair")
    confusion_all = ConfusionCounts()
    confusion_scored = ConfusionCounts()
    n_excluded = 0
    for truth, pred in pairs:
        c = ConfusionCounts.from_pair(truth, pred)
        confusion_all.add(c)
        truth = np.asarray(truth)
        if truth.min() == truth.max():
            n_excluded += 1
        else:
            confusion_scored.add(c)
    accuracy = (confusion_all.tp + confusion_all.tn) / confusion_all.total
    precision = _ratio(confusion_scored.tp, confusion_scored.tp + confusion_scored.fp)
    recall = _ratio(confusion_scored.tp, confusion_scored.tp + confusion_scored.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricsReport(
        accuracy=accuracy, precision=precision, recall=recall, f1=f1,
        n_videos=len(pairs), n_excluded=n_excluded,
        confusion_all=confusion_all, confusion_scored=confusion_scored,
    )
