"""Classification metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from phgcl.errors import StructuralError

THRESHOLD = 0.5


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape:
        raise StructuralError(f"scores {scores.shape} and labels {labels.shape} differ in shape")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise StructuralError("AUC is undefined unless both classes are present")
    ranks = rankdata(scores)  # ties share their average rank
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class Confusion:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def acc(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else float("nan")

    @property
    def sen(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else float("nan")

    @property
    def spe(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else float("nan")


def confusion(probs, labels, threshold: float = THRESHOLD) -> Confusion:
    pred = np.asarray(probs) >= threshold
    y = np.asarray(labels).astype(bool)
    return Confusion(int((pred & y).sum()), int((~pred & ~y).sum()), int((pred & ~y).sum()), int((~pred & y).sum()))


@dataclass(frozen=True)
class FoldMetrics:
    repeat: int
    fold: int
    acc: float
    auc: float
    sen: float
    spe: float
    tp: int
    tn: int
    fp: int
    fn: int
    best_epoch: int = -1

    @classmethod
    def from_predictions(cls, probs, labels, repeat: int = 0, fold: int = 0, best_epoch: int = -1) -> FoldMetrics:
        c = confusion(probs, labels)
        return cls(repeat, fold, c.acc, auc(probs, labels), c.sen, c.spe, c.tp, c.tn, c.fp, c.fn, best_epoch)


@dataclass(frozen=True)
class Metrics:
    """Mean and standard deviation of each metric over folds x repeats."""

    folds: tuple[FoldMetrics, ...]

    def _values(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.folds], dtype=np.float64)

    def mean(self, name: str) -> float:
        return float(self._values(name).mean())

    def std(self, name: str) -> float:
        return float(self._values(name).std())

    @property
    def acc(self) -> float:
        return self.mean("acc")

    @property
    def auc(self) -> float:
        return self.mean("auc")

    @property
    def sen(self) -> float:
        return self.mean("sen")

    @property
    def spe(self) -> float:
        return self.mean("spe")

    def summary(self) -> dict[str, float]:
        out = {}
        for name in ("acc", "auc", "sen", "spe"):
            out[name] = self.mean(name)
            out[f"{name}_std"] = self.std(name)
        return out
