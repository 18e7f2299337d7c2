"""Detection and classification evaluation.

IoU, VOC-style greedy matching, all-point interpolated average precision,
confusion matrices with per-class and micro-averaged precision/recall/F1, and
the combined performance score (mAP minus the training and validation losses).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import DegenerateBoxError, NoClassesError, OutOfRangeError


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; construction rejects non-positive extent."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise DegenerateBoxError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    image_id: str
    label: Hashable
    score: float
    box: Box


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    label: Hashable
    box: Box


@dataclass
class MatchResult:
    """Greedy matching outcome, organized per class for AP computation."""

    flags_by_label: dict  # label -> list of (score, is_tp), score-descending
    gt_counts: dict  # label -> number of ground truths

    def scored_flags(self, label) -> list[tuple[float, bool]]:
        return self.flags_by_label.get(label, [])

    def num_gt(self, label) -> int:
        return self.gt_counts.get(label, 0)

    @property
    def labels(self) -> set:
        return set(self.flags_by_label) | set(self.gt_counts)


def match_detections(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    iou_threshold: float = 0.5,
) -> MatchResult:
    """VOC-style greedy matching, per class.

    Predictions are visited in descending score order (ties keep input order);
    each claims the unmatched same-class, same-image ground truth of highest
    IoU at or above the threshold. Unclaimed predictions are false positives,
    unclaimed ground truths false negatives.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise OutOfRangeError(f"iou_threshold must lie in (0, 1], got {iou_threshold!r}")
    gts_by_key: dict = defaultdict(list)
    gt_counts: dict = defaultdict(int)
    for gt in ground_truths:
        gts_by_key[(gt.label, gt.image_id)].append(gt)
        gt_counts[gt.label] += 1

    claimed: set[int] = set()
    flags_by_label: dict = defaultdict(list)
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    for i in order:
        det = detections[i]
        best_iou, best_gt = 0.0, None
        for gt in gts_by_key.get((det.label, det.image_id), ()):
            if id(gt) in claimed:
                continue
            overlap = iou(det.box, gt.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou, best_gt = overlap, gt
        if best_gt is not None:
            claimed.add(id(best_gt))
            flags_by_label[det.label].append((det.score, True))
        else:
            flags_by_label[det.label].append((det.score, False))
    return MatchResult(dict(flags_by_label), dict(gt_counts))


def average_precision(
    scored_flags: Sequence[tuple[float, bool]], num_gt: int
) -> float:
    """Area under the monotone precision envelope (all-point interpolation)."""
    if num_gt < 0:
        raise OutOfRangeError("num_gt must be >= 0")
    if num_gt == 0 or not scored_flags:
        return 0.0
    order = sorted(range(len(scored_flags)), key=lambda i: -scored_flags[i][0])
    tp = np.cumsum([1.0 if scored_flags[i][1] else 0.0 for i in order])
    fp = np.cumsum([0.0 if scored_flags[i][1] else 1.0 for i in order])
    recall = tp / num_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = 0.0
    area = 0.0
    for r, p in zip(recall, envelope):
        area += (r - prev_r) * p
        prev_r = r
    return float(area)


def mean_average_precision(per_class_aps: Sequence[float]) -> float:
    """Unweighted mean of per-class average precisions."""
    if not per_class_aps:
        raise NoClassesError("mAP needs at least one class")
    return float(np.mean(per_class_aps))


@dataclass(frozen=True)
class ConfusionMatrix:
    """N x N counts; entry (i, j) = actual class i predicted as class j."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise OutOfRangeError(f"confusion matrix must be square, got {arr.shape}")
        if np.any(arr < 0):
            raise OutOfRangeError("confusion counts must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @classmethod
    def from_pairs(cls, num_classes: int, pairs: Iterable[tuple[int, int]]):
        counts = np.zeros((num_classes, num_classes), dtype=np.int64)
        for actual, predicted in pairs:
            counts[actual, predicted] += 1
        return cls(counts)

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassPRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "ClassPRF":
        # zero denominators yield 0, never NaN, so reports aggregate cleanly
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return cls(precision, recall, f1, tp, fp, fn)


def class_prf(cm: ConfusionMatrix, class_index: int) -> ClassPRF:
    """Per-class precision/recall/F1 read off the confusion matrix."""
    n = cm.num_classes
    if not 0 <= class_index < n:
        raise IndexError(f"class index {class_index} out of range for {n} classes")
    counts = cm.counts
    tp = int(counts[class_index, class_index])
    fp = int(counts[:, class_index].sum()) - tp
    fn = int(counts[class_index, :].sum()) - tp
    return ClassPRF.from_counts(tp, fp, fn)


def micro_prf_from_counts(
    tps: Sequence[int], fps: Sequence[int], fns: Sequence[int]
) -> ClassPRF:
    """Micro averaging: pool TP/FP/FN across classes before dividing."""
    return ClassPRF.from_counts(int(sum(tps)), int(sum(fps)), int(sum(fns)))


def micro_prf(cm: ConfusionMatrix) -> ClassPRF:
    """Micro-averaged P/R/F1 over all classes of the matrix."""
    per_class = [class_prf(cm, i) for i in range(cm.num_classes)]
    return micro_prf_from_counts(
        [c.tp for c in per_class], [c.fp for c in per_class], [c.fn for c in per_class]
    )


@dataclass(frozen=True)
class PerformanceScore:
    map: float
    train_loss: float
    validation_loss: float
    score: float


def performance_score(
    map_value: float, train_loss: float, validation_loss: float
) -> PerformanceScore:
    """Combined metric: mAP minus the sum of training and validation losses."""
    if not 0.0 <= map_value <= 1.0:
        raise OutOfRangeError(f"mAP must lie in [0, 1], got {map_value!r}")
    if train_loss < 0.0 or validation_loss < 0.0:
        raise OutOfRangeError("losses must be non-negative")
    return PerformanceScore(
        map_value, train_loss, validation_loss,
        map_value - (train_loss + validation_loss),
    )


@dataclass(frozen=True)
class DetectionEvaluation:
    """Full offline evaluation of a detection set against ground truth."""

    labels: tuple
    ap_by_label: dict
    mean_ap: float
    confusion: ConfusionMatrix
    per_class: dict  # label -> ClassPRF, unmatched GTs/predictions included
    micro: ClassPRF


def _confusion_from_detections(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    labels: Sequence,
    iou_threshold: float,
) -> tuple[ConfusionMatrix, dict, dict]:
    """Class-agnostic greedy matching feeding the confusion matrix.

    Matched pairs land in the matrix at (gt_class, pred_class); unmatched
    ground truths and predictions are returned as extra per-class FN/FP
    counts since they have no cell in an N x N grid.
    """
    index = {label: i for i, label in enumerate(labels)}
    gts_by_image: dict = defaultdict(list)
    for gt in ground_truths:
        gts_by_image[gt.image_id].append(gt)
    claimed: set[int] = set()
    pairs = []
    extra_fp: dict = {label: 0 for label in labels}
    extra_fn: dict = {label: 0 for label in labels}
    order = sorted(range(len(detections)), key=lambda i: -detections[i].score)
    for i in order:
        det = detections[i]
        best_iou, best_gt = 0.0, None
        for gt in gts_by_image.get(det.image_id, ()):
            if id(gt) in claimed:
                continue
            overlap = iou(det.box, gt.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou, best_gt = overlap, gt
        if best_gt is not None:
            claimed.add(id(best_gt))
            pairs.append((index[best_gt.label], index[det.label]))
        else:
            extra_fp[det.label] += 1
    for gt in ground_truths:
        if id(gt) not in claimed:
            extra_fn[gt.label] += 1
    return ConfusionMatrix.from_pairs(len(labels), pairs), extra_fp, extra_fn


def evaluate_detections(
    detections: Sequence[Detection],
    ground_truths: Sequence[GroundTruth],
    labels: Sequence,
    iou_threshold: float = 0.5,
) -> DetectionEvaluation:
    """Per-class AP, mAP, cross-class confusion, and P/R/F1 in one pass."""
    if not labels:
        raise NoClassesError("evaluation needs at least one class label")
    matches = match_detections(detections, ground_truths, iou_threshold)
    ap_by_label = {
        label: average_precision(matches.scored_flags(label), matches.num_gt(label))
        for label in labels
    }
    confusion, extra_fp, extra_fn = _confusion_from_detections(
        detections, ground_truths, labels, iou_threshold
    )
    per_class = {}
    for i, label in enumerate(labels):
        base = class_prf(confusion, i)
        per_class[label] = ClassPRF.from_counts(
            base.tp, base.fp + extra_fp[label], base.fn + extra_fn[label]
        )
    micro = micro_prf_from_counts(
        [per_class[label].tp for label in labels],
        [per_class[label].fp for label in labels],
        [per_class[label].fn for label in labels],
    )
    return DetectionEvaluation(
        tuple(labels),
        ap_by_label,
        mean_average_precision(list(ap_by_label.values())),
        confusion,
        per_class,
        micro,
    )
