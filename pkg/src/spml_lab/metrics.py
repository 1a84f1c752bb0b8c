"""Multi-label evaluation metrics over a confidence matrix.

Five metrics: top-set multi-label accuracy, top-1 multi-label accuracy,
IOU accuracy, instance-averaged F1 and mean average precision, plus the
average-predicted-positives diagnostic. Thresholded metrics use a strict
f > threshold rule; ranking ties break by ascending class index and,
inside AP, by ascending instance id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError

METRIC_COLUMNS = ("top_set_ml", "top1_ml", "iou_acc", "f1", "map")


@dataclass
class EvalSet:
    """Ground truth for evaluation: one non-empty label set per instance."""

    label_sets: list[set[int]]
    num_classes: int

    def __post_init__(self):
        for i, labels in enumerate(self.label_sets):
            if not labels:
                raise DomainError(f"instance {i}: empty ground-truth label set")
            for lab in labels:
                if not 0 <= lab < self.num_classes:
                    raise DomainError(
                        f"instance {i}: label {lab} out of range "
                        f"[0, {self.num_classes})")

    def __len__(self):
        return len(self.label_sets)

    def as_matrix(self) -> np.ndarray:
        gt = np.zeros((len(self), self.num_classes), dtype=bool)
        for i, labels in enumerate(self.label_sets):
            gt[i, sorted(labels)] = True
        return gt


def _check(preds: np.ndarray, gt: EvalSet) -> np.ndarray:
    preds = np.asarray(preds, dtype=np.float64)
    if preds.shape != (len(gt), gt.num_classes):
        raise ShapeError(
            f"predictions shape {preds.shape} != "
            f"({len(gt)}, {gt.num_classes})")
    return preds


def _ranked_classes(row: np.ndarray) -> np.ndarray:
    """Class indices by decreasing confidence, ties by ascending index."""
    c = row.shape[0]
    return np.lexsort((np.arange(c), -row))


def top_set_ml(preds, gt: EvalSet) -> float:
    preds = _check(preds, gt)
    total = 0.0
    for i, labels in enumerate(gt.label_sets):
        top = set(_ranked_classes(preds[i])[:len(labels)].tolist())
        total += len(labels & top) / len(labels)
    return total / len(gt)


def top1_ml(preds, gt: EvalSet) -> float:
    preds = _check(preds, gt)
    hits = sum(int(np.argmax(preds[i])) in labels
               for i, labels in enumerate(gt.label_sets))
    return hits / len(gt)


def _thresholded_sets(preds: np.ndarray, threshold: float) -> list[set[int]]:
    return [set(np.nonzero(row > threshold)[0].tolist()) for row in preds]


def iou_acc(preds, gt: EvalSet, threshold: float = 0.5) -> float:
    preds = _check(preds, gt)
    total = 0.0
    for labels, pred in zip(gt.label_sets, _thresholded_sets(preds, threshold)):
        total += len(labels & pred) / len(labels | pred)
    return total / len(gt)


def f1(preds, gt: EvalSet, threshold: float = 0.5) -> float:
    preds = _check(preds, gt)
    total = 0.0
    for labels, pred in zip(gt.label_sets, _thresholded_sets(preds, threshold)):
        total += 2 * len(labels & pred) / (len(labels) + len(pred))
    return total / len(gt)


def mean_ap(preds, gt: EvalSet) -> tuple[float, np.ndarray]:
    """Non-interpolated AP per class, averaged over classes that have at
    least one positive; positive-free classes get NaN in per_class_ap."""
    preds = _check(preds, gt)
    gt_mat = gt.as_matrix()
    n, c = preds.shape
    per_class = np.full(c, np.nan)
    for k in range(c):
        positives = gt_mat[:, k]
        n_pos = int(positives.sum())
        if n_pos == 0:
            continue
        order = np.lexsort((np.arange(n), -preds[:, k]))
        hits = positives[order]
        cum_hits = np.cumsum(hits)
        ranks = np.arange(1, n + 1)
        precision_at_pos = (cum_hits / ranks)[hits]
        per_class[k] = precision_at_pos.sum() / n_pos
    valid = ~np.isnan(per_class)
    if not valid.any():
        raise DomainError("every class is positive-free; mAP undefined")
    return float(per_class[valid].mean()), per_class


def avg_predicted_positives(preds, threshold: float = 0.5) -> float:
    preds = np.asarray(preds, dtype=np.float64)
    return float((preds > threshold).sum(axis=1).mean())


@dataclass
class MetricsReport:
    top_set_ml: float
    top1_ml: float
    iou_acc: float
    f1: float
    map: float
    avg_predicted_positives: float
    per_class_ap: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "top_set_ml": self.top_set_ml,
            "top1_ml": self.top1_ml,
            "iou_acc": self.iou_acc,
            "f1": self.f1,
            "map": self.map,
            "avg_predicted_positives": self.avg_predicted_positives,
            "per_class_ap": [None if np.isnan(v) else float(v)
                             for v in self.per_class_ap],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def row(self) -> list[float]:
        return [self.top_set_ml, self.top1_ml, self.iou_acc, self.f1, self.map]


def compute_report(preds, gt: EvalSet, threshold: float = 0.5) -> MetricsReport:
    preds = _check(preds, gt)
    map_val, per_class = mean_ap(preds, gt)
    return MetricsReport(
        top_set_ml=top_set_ml(preds, gt),
        top1_ml=top1_ml(preds, gt),
        iou_acc=iou_acc(preds, gt, threshold),
        f1=f1(preds, gt, threshold),
        map=map_val,
        avg_predicted_positives=avg_predicted_positives(preds, threshold),
        per_class_ap=per_class.tolist(),
    )


def format_table(rows: dict[str, MetricsReport]) -> str:
    """Aligned text table, one row per configuration, columns in the
    top-set / top-1 / IOU / F1 / mAP order."""
    header = ["loss", "top_set_ml", "top1_ml", "iou_acc", "f1", "map",
              "avg_pred_pos"]
    lines = ["  ".join(f"{h:>12}" for h in header)]
    for name, rep in rows.items():
        cells = [f"{name:>12}"] + [f"{v:12.4f}" for v in rep.row()]
        cells.append(f"{rep.avg_predicted_positives:12.4f}")
        lines.append("  ".join(cells))
    return "\n".join(lines)
