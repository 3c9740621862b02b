"""Binary classification evaluation with Passed as the positive class."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .process_data import PASSED

METRIC_NAMES = ("f1", "accuracy", "precision", "recall", "specificity", "mcc_abs", "fnr", "fpr")


def _as_binary(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.dtype.kind in "US":
        return (arr == PASSED).astype(np.int64)
    return (arr.astype(float) > 0.5).astype(np.int64)


def _check(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    y = _as_binary(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise ValueError(f"scores and labels must be 1-D of equal length, got {s.shape} and {y.shape}")
    if s.size == 0:
        raise ValueError("no scores to evaluate")
    return s, y


def _require_both_classes(y: np.ndarray) -> None:
    if y.min() == y.max():
        raise ValueError("both Passed and Failed rows are required")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    threshold: float
    f1: float
    accuracy: float
    precision: float
    recall: float
    specificity: float
    mcc_abs: float
    fnr: float
    fpr: float
    confusion: ConfusionMatrix
    degenerate: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {"threshold": self.threshold}
        d.update({name: getattr(self, name) for name in METRIC_NAMES})
        d["confusion"] = {"tp": self.confusion.tp, "tn": self.confusion.tn, "fp": self.confusion.fp, "fn": self.confusion.fn}
        d["degenerate"] = list(self.degenerate)
        return d


@dataclass(frozen=True)
class CurvePoints:
    x: np.ndarray
    y: np.ndarray
    thresholds: np.ndarray

    def rows(self) -> List[Tuple[float, float, float]]:
        return list(zip(self.thresholds.tolist(), self.x.tolist(), self.y.tolist()))


def confusion_at(scores, labels, threshold: float) -> ConfusionMatrix:
    """Counts with the rule ``score >= threshold`` -> predicted Passed."""
    s, y = _check(scores, labels)
    pred = s >= threshold
    pos = y == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def single_threshold_metrics(cm: ConfusionMatrix, threshold: float = float("nan")) -> MetricsReport:
    """The eight single-threshold measures; zero denominators yield 0 and a flag."""
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")
    tp, tn, fp, fn = cm.tp, cm.tn, cm.fp, cm.fn
    degenerate = []

    def ratio(name, num, den):
        if den == 0:
            degenerate.append(name)
            return 0.0
        return num / den

    values = {
        "f1": ratio("f1", 2 * tp, 2 * tp + fp + fn),
        "accuracy": ratio("accuracy", tp + tn, cm.total),
        "precision": ratio("precision", tp, tp + fp),
        "recall": ratio("recall", tp, tp + fn),
        "specificity": ratio("specificity", tn, tn + fp),
    }
    mcc_den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if mcc_den == 0:
        degenerate.append("mcc_abs")
        values["mcc_abs"] = 0.0
    else:
        values["mcc_abs"] = min(1.0, abs(tp * tn - fp * fn) / math.sqrt(mcc_den))
    values["fnr"] = ratio("fnr", fn, fn + tp)
    values["fpr"] = ratio("fpr", fp, tn + fp)
    return MetricsReport(threshold=threshold, confusion=cm, degenerate=tuple(degenerate), **values)


def _sweep(s: np.ndarray, y: np.ndarray):
    """Cumulative tp/fp counts at each distinct score, descending."""
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    tp_cum = np.cumsum(y_sorted)
    fp_cum = np.cumsum(1 - y_sorted)
    last_of_group = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), s_sorted.size - 1]
    return s_sorted[last_of_group], tp_cum[last_of_group], fp_cum[last_of_group]


def roc_auroc(scores, labels) -> Tuple[CurvePoints, float]:
    """ROC curve over distinct thresholds (ties grouped) and its trapezoidal area.

    The area is accumulated in integer half-units, so it equals the
    Mann-Whitney statistic up to a single final division.
    """
    s, y = _check(scores, labels)
    _require_both_classes(y)
    thr, tp, fp = _sweep(s, y)
    P, N = int(y.sum()), int(y.size - y.sum())
    tp = np.r_[0, tp].astype(np.int64)
    fp = np.r_[0, fp].astype(np.int64)
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    auc = twice_area / (2 * P * N)
    curve = CurvePoints(fp / N, tp / P, np.r_[np.inf, thr])
    return curve, auc


def auroc_score(scores, labels) -> float:
    return roc_auroc(scores, labels)[1]


def pr_auprc(scores, labels) -> Tuple[CurvePoints, float]:
    """Precision-recall curve and its step-integrated area (no interpolation)."""
    s, y = _check(scores, labels)
    P = int(y.sum())
    if P == 0:
        raise ValueError("no Passed rows; precision-recall is undefined")
    thr, tp, fp = _sweep(s, y)
    recall = tp / P
    precision = tp / (tp + fp)
    prev_recall = np.r_[0.0, recall[:-1]]
    auprc = float(math.fsum((recall - prev_recall) * precision))
    return CurvePoints(recall, precision, thr), auprc


def _mcc_sq_key(cm: ConfusionMatrix) -> Tuple[int, int]:
    num = cm.tp * cm.tn - cm.fp * cm.fn
    den = (cm.tp + cm.fp) * (cm.tp + cm.fn) * (cm.tn + cm.fp) * (cm.tn + cm.fn)
    return (num * num, den) if den else (0, 1)


def mcc_candidates(scores) -> np.ndarray:
    """Midpoints of consecutive distinct scores plus one point beyond each end."""
    u = np.unique(np.asarray(scores, dtype=float))
    mid = (u[:-1] + u[1:]) / 2.0
    # adjacent doubles can round the midpoint down onto the lower score
    mid = np.where(mid > u[:-1], mid, u[1:])
    return np.r_[u[0] - 1.0, mid, u[-1] + 1.0]


def best_mcc_threshold(scores, labels) -> Tuple[float, MetricsReport]:
    """Threshold maximizing |MCC|; ties go to the smallest threshold.

    Candidates are compared on squared MCC as exact integer ratios.
    """
    s, y = _check(scores, labels)
    _require_both_classes(y)
    best_t, best_cm, best_key = None, None, None
    for t in mcc_candidates(s):
        cm = confusion_at(s, y, t)
        num, den = _mcc_sq_key(cm)
        if best_key is None or num * best_key[1] > best_key[0] * den:
            best_t, best_cm, best_key = float(t), cm, (num, den)
    return best_t, single_threshold_metrics(best_cm, best_t)


@dataclass
class EvaluationResult:
    auroc: float
    auprc: float
    report: MetricsReport
    roc: CurvePoints
    pr: CurvePoints
    n: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"n": self.n, "auroc": self.auroc, "auprc": self.auprc}
        d.update(self.report.to_dict())
        d.update(self.extra)
        return d


def evaluate_scores(scores, labels) -> EvaluationResult:
    roc, auroc = roc_auroc(scores, labels)
    pr, auprc = pr_auprc(scores, labels)
    _, report = best_mcc_threshold(scores, labels)
    return EvaluationResult(auroc, auprc, report, roc, pr, n=len(scores))
