"""Threshold calibration and F1 evaluation.

Per-class decision thresholds are picked on validation precision-recall
points (candidates = observed scores plus 0.5, F1 is piecewise constant in
between), predictions use a strict > comparison, and the headline number is
the class-support weighted F1. All F1 values live in [0, 1]; report
formatting converts to the percent scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import LEVELS, NUM_LEVELS


@dataclass
class ConfusionCounts:
    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray


@dataclass
class MetricsReport:
    precision: np.ndarray  # (5,)
    recall: np.ndarray  # (5,)
    f1: np.ndarray  # (5,)
    supports: np.ndarray  # (5,) int
    weights: np.ndarray  # (5,)
    weighted_f1: float


@dataclass
class SeedAggregate:
    mean: MetricsReport
    per_seed_weighted_f1: list[float]
    wf1_min: float
    wf1_median: float
    wf1_max: float


@dataclass
class OverlapReport:
    model_names: list[str]
    shared_error_pct: np.ndarray  # (M, M)
    correct_model_histogram: dict[int, int]  # models-fully-correct -> item count


def _prf(tp: float, fp: float, fn: float) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def pr_curve(scores, labels) -> list[tuple[float, float, float, float]]:
    """(threshold, precision, recall, F1) at every distinct score value.

    Predictions are score > threshold, so each point describes the classifier
    that rejects everything at or below that score.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.size == 0:
        raise ValueError("pr_curve needs at least one item")
    points = []
    for thr in np.unique(scores):
        pred = scores > thr
        tp = float(np.sum(pred & labels))
        fp = float(np.sum(pred & ~labels))
        fn = float(np.sum(~pred & labels))
        p, r, f1 = _prf(tp, fp, fn)
        points.append((float(thr), p, r, f1))
    return points


def best_threshold(scores, labels) -> tuple[float, float]:
    """Threshold maximizing F1 over observed scores plus 0.5; ties go high."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    best_thr, best_f1 = 0.5, -1.0
    candidates = np.unique(np.append(scores, 0.5))
    for thr in candidates:  # ascending, >= keeps the largest tied threshold
        pred = scores > thr
        tp = float(np.sum(pred & labels))
        fp = float(np.sum(pred & ~labels))
        fn = float(np.sum(~pred & labels))
        _, _, f1 = _prf(tp, fp, fn)
        if f1 >= best_f1:
            best_thr, best_f1 = float(thr), f1
    return best_thr, best_f1


def calibrate_thresholds(val_scores, val_labels) -> np.ndarray:
    """Per-class F1-maximizing thresholds on validation scores (N, 5)."""
    val_scores = np.asarray(val_scores, dtype=float)
    val_labels = np.asarray(val_labels, dtype=bool)
    if val_scores.shape != val_labels.shape or val_scores.shape[1] != NUM_LEVELS:
        raise ValueError("scores and labels must align with shape (N, 5)")
    thresholds = np.full(NUM_LEVELS, 0.5)
    for c in range(NUM_LEVELS):
        if not val_labels[:, c].any():
            warnings.warn(f"class {LEVELS[c]}: no validation positives, falling back to threshold 0.5")
            continue
        thresholds[c], _ = best_threshold(val_scores[:, c], val_labels[:, c])
    return thresholds


def apply_thresholds(scores, thresholds) -> np.ndarray:
    """Positive iff probability is strictly greater than the class threshold."""
    return np.asarray(scores, dtype=float) > np.asarray(thresholds, dtype=float)


def confusion(predictions, gold) -> ConfusionCounts:
    predictions = np.asarray(predictions, dtype=bool)
    gold = np.asarray(gold, dtype=bool)
    if predictions.shape != gold.shape:
        raise ValueError("predictions and gold labels must have the same shape")
    tp = np.sum(predictions & gold, axis=0).astype(float)
    fp = np.sum(predictions & ~gold, axis=0).astype(float)
    fn = np.sum(~predictions & gold, axis=0).astype(float)
    tn = np.sum(~predictions & ~gold, axis=0).astype(float)
    return ConfusionCounts(tp, fp, fn, tn)


def weighted_f1(per_class_f1, supports) -> float:
    """Support-weighted mean of per-class F1; 0 (with warning) on empty support."""
    per_class_f1 = np.asarray(per_class_f1, dtype=float)
    supports = np.asarray(supports, dtype=float)
    total = supports.sum()
    if total <= 0:
        warnings.warn("total support is zero; weighted F1 defined as 0")
        return 0.0
    return float(np.sum(per_class_f1 * supports / total))


def compute_metrics(predictions, gold) -> MetricsReport:
    """Per-class precision/recall/F1 plus the support-weighted F1."""
    conf = confusion(predictions, gold)
    precision = np.zeros(NUM_LEVELS)
    recall = np.zeros(NUM_LEVELS)
    f1 = np.zeros(NUM_LEVELS)
    for c in range(NUM_LEVELS):
        precision[c], recall[c], f1[c] = _prf(conf.tp[c], conf.fp[c], conf.fn[c])
    supports = (conf.tp + conf.fn).astype(int)
    total = supports.sum()
    weights = supports / total if total > 0 else np.zeros(NUM_LEVELS)
    return MetricsReport(precision, recall, f1, supports, weights, weighted_f1(f1, supports))


def aggregate_seeds(reports: list[MetricsReport]) -> SeedAggregate:
    """Arithmetic mean across seed runs, keeping the spread of weighted F1."""
    if not reports:
        raise ValueError("no reports to aggregate")
    mean = MetricsReport(
        precision=np.mean([r.precision for r in reports], axis=0),
        recall=np.mean([r.recall for r in reports], axis=0),
        f1=np.mean([r.f1 for r in reports], axis=0),
        supports=np.mean([r.supports for r in reports], axis=0).astype(int),
        weights=np.mean([r.weights for r in reports], axis=0),
        weighted_f1=float(np.mean([r.weighted_f1 for r in reports])),
    )
    wf1 = [float(r.weighted_f1) for r in reports]
    return SeedAggregate(mean, wf1, min(wf1), float(np.median(wf1)), max(wf1))


def misclassification_analysis(predictions_by_model: dict[str, np.ndarray], gold) -> OverlapReport:
    """Pairwise shared-error percentages and a correct-model-count histogram.

    An item counts as correct for a model only when all five label slots
    match. Shared error between two models is |Ei & Ej| / |Ei | Ej| as a
    percentage (100 when both error sets are empty).
    """
    if len(predictions_by_model) < 2:
        raise ValueError("need at least two models to compare")
    gold = np.asarray(gold, dtype=bool)
    names = list(predictions_by_model)
    error_sets = []
    for name in names:
        preds = np.asarray(predictions_by_model[name], dtype=bool)
        if preds.shape != gold.shape:
            raise ValueError(f"model {name!r} predictions do not cover the same items as gold")
        error_sets.append(np.any(preds != gold, axis=1))

    m = len(names)
    pct = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            inter = float(np.sum(error_sets[i] & error_sets[j]))
            union = float(np.sum(error_sets[i] | error_sets[j]))
            pct[i, j] = 100.0 if union == 0 else 100.0 * inter / union

    correct_counts = np.sum([~e for e in error_sets], axis=0)
    histogram = {k: int(np.sum(correct_counts == k)) for k in range(m + 1)}
    return OverlapReport(names, pct, histogram)


# ---------------------------------------------------------------------------
# report formatting (column order F1_A..F1_E, then weighted F1)
# ---------------------------------------------------------------------------

CSV_HEADER = "model,F1_A,F1_B,F1_C,F1_D,F1_E,F1_weighted"


def metrics_csv_row(label: str, report: MetricsReport) -> str:
    cells = [f"{100 * v:.1f}" for v in report.f1] + [f"{100 * report.weighted_f1:.1f}"]
    return ",".join([label] + cells)


def metrics_csv(rows: list[tuple[str, MetricsReport]]) -> str:
    return "\n".join([CSV_HEADER] + [metrics_csv_row(lbl, rep) for lbl, rep in rows]) + "\n"


def metrics_table(rows: list[tuple[str, MetricsReport]]) -> str:
    header = ["model", "F1_A", "F1_B", "F1_C", "F1_D", "F1_E", "F1"]
    body = [
        [lbl] + [f"{100 * v:.1f}" for v in rep.f1] + [f"{100 * rep.weighted_f1:.1f}"]
        for lbl, rep in rows
    ]
    widths = [max(len(r[c]) for r in [header] + body) for c in range(len(header))]
    lines = []
    for row in [header] + body:
        lines.append("  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"
