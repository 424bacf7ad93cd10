"""Detection-quality metrics: greedy matching, 101-point AP, and mAP.

A prediction is a true positive when it matches an unmatched same-category
ground-truth box with IoU at or above the threshold (inclusive), taking
predictions in score order and truths by maximal IoU. Average precision
interpolates precision at the 101 recall levels 0.00, 0.01, ..., 1.00,
and mAP averages AP over the categories that have ground-truth instances,
pooling detections globally across images.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite
from typing import Any, Mapping, Sequence

import numpy as np

from .geometry import iou
from .records import GroundTruthBox, SceneRecord, ScoredBox

RECALL_LEVELS = np.array([i / 100 for i in range(101)])

_TRUTH_KINDS = ("ground_truth", "fused")


@dataclass(frozen=True)
class MatchResult:
    """Per-prediction hit flags (in input order) plus unmatched-truth count."""

    true_positive: tuple[bool, ...]
    matched_truth: tuple[int | None, ...]
    false_negatives: int

    @property
    def tp_count(self) -> int:
        return sum(self.true_positive)

    @property
    def fp_count(self) -> int:
        return len(self.true_positive) - self.tp_count


def match_greedy(
    predictions: Sequence[ScoredBox],
    truths: Sequence[GroundTruthBox],
    iou_threshold: float,
) -> MatchResult:
    """Greedily assign predictions to same-category truths.

    Predictions are visited by descending score (ties: input order); each
    takes the unmatched same-category truth with maximal IoU when that IoU
    reaches ``iou_threshold`` (IoU ties keep the earliest truth).
    """
    if not (isfinite(iou_threshold) and 0.0 < iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold!r}")
    order = sorted(range(len(predictions)), key=lambda i: -predictions[i].score)
    taken = [False] * len(truths)
    hit = [False] * len(predictions)
    assigned: list[int | None] = [None] * len(predictions)
    for i in order:
        pred = predictions[i]
        best = -1
        best_iou = -1.0
        for j, truth in enumerate(truths):
            if taken[j] or truth.category != pred.category:
                continue
            overlap = iou(pred.box, truth.box)
            if overlap > best_iou:
                best = j
                best_iou = overlap
        if best >= 0 and best_iou >= iou_threshold:
            hit[i] = True
            assigned[i] = best
            taken[best] = True
    return MatchResult(
        true_positive=tuple(hit),
        matched_truth=tuple(assigned),
        false_negatives=taken.count(False),
    )


def average_precision(
    scores: Sequence[float],
    true_positive: Sequence[bool],
    num_truths: int,
) -> float:
    """101-point interpolated AP for one category.

    At each recall level the interpolated precision is the best precision
    at any operating point with recall at or above that level (0 when no
    such point exists); AP is the mean over the 101 levels.
    """
    if num_truths < 1:
        raise ValueError(f"num_truths must be >= 1, got {num_truths}")
    if len(scores) != len(true_positive):
        raise ValueError(f"got {len(scores)} scores but {len(true_positive)} flags")
    if not scores:
        return 0.0
    order = sorted(range(len(scores)), key=lambda i: -float(scores[i]))
    hits = np.array([bool(true_positive[i]) for i in order], dtype=np.float64)
    cumulative = np.cumsum(hits)
    recall = cumulative / num_truths
    precision = cumulative / np.arange(1, len(hits) + 1, dtype=np.float64)
    # Best precision at recall >= each operating point's recall.
    best_from = np.maximum.accumulate(precision[::-1])[::-1]
    first_at = np.searchsorted(recall, RECALL_LEVELS, side="left")
    interpolated = np.where(
        first_at < len(hits), best_from[np.minimum(first_at, len(hits) - 1)], 0.0
    )
    return float(np.sum(interpolated) / 101.0)


@dataclass(frozen=True)
class ThresholdReport:
    """Per-category APs and pooled counts at one IoU threshold."""

    iou_threshold: float
    ap_per_category: Mapping[str, float]
    mean_ap: float
    true_positives: int
    false_positives: int
    false_negatives: int


@dataclass(frozen=True)
class EvalReport:
    """Evaluation across one or more IoU thresholds."""

    thresholds: tuple[float, ...]
    per_threshold: tuple[ThresholdReport, ...]
    mean_ap_over_thresholds: float

    def to_obj(self) -> dict[str, Any]:
        """JSON-ready structure with a stable field layout."""
        return {
            "format_version": 1,
            "kind": "eval_report",
            "thresholds": [float(t) for t in self.thresholds],
            "per_threshold": [
                {
                    "iou_threshold": float(r.iou_threshold),
                    "ap_per_category": {
                        cat: float(r.ap_per_category[cat]) for cat in sorted(r.ap_per_category)
                    },
                    "mean_ap": float(r.mean_ap),
                    "true_positives": r.true_positives,
                    "false_positives": r.false_positives,
                    "false_negatives": r.false_negatives,
                }
                for r in self.per_threshold
            ],
            "mean_ap_over_thresholds": float(self.mean_ap_over_thresholds),
        }


def threshold_range(start: float = 0.5, stop: float = 0.95, step: float = 0.05) -> tuple[float, ...]:
    """Inclusive threshold ladder, e.g. the standard 0.5:0.95:0.05 ten-step range."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if not 0.0 < start <= stop <= 1.0:
        raise ValueError(f"need 0 < start <= stop <= 1, got {start}..{stop}")
    count = int(round((stop - start) / step)) + 1
    values = tuple(round(start + i * step, 10) for i in range(count))
    return tuple(v for v in values if v <= stop + 1e-9)


def evaluate(
    predictions: Sequence[SceneRecord],
    truths: Sequence[SceneRecord],
    thresholds: Sequence[float],
    *,
    categories: Sequence[str] | None = None,
) -> EvalReport:
    """Score scene-level predictions against ground truth.

    Predictions may cover a subset of the truth images (absent images
    count all their truths as false negatives), but an image id missing
    from the truths, or a prediction category outside the known category
    set, raises ValueError. Detections are pooled globally per category;
    mAP averages over categories with at least one truth instance.
    """
    if not thresholds:
        raise ValueError("need at least one IoU threshold")
    truth_by_image: dict[str, SceneRecord] = {}
    for scene in truths:
        if scene.kind not in _TRUTH_KINDS:
            raise ValueError(f"truth records must be one of {_TRUTH_KINDS}, got {scene.kind!r}")
        if scene.image_id in truth_by_image:
            raise ValueError(f"duplicate truth image id {scene.image_id!r}")
        truth_by_image[scene.image_id] = scene

    truth_categories: set[str] = set()
    truth_count: dict[str, int] = {}
    for scene in truth_by_image.values():
        for entry in scene.boxes:
            truth_categories.add(entry.category)
            truth_count[entry.category] = truth_count.get(entry.category, 0) + 1

    known = set(categories) if categories is not None else truth_categories
    pred_by_image: dict[str, SceneRecord] = {}
    for scene in predictions:
        if scene.kind != "predictions":
            raise ValueError(f"prediction records must have kind 'predictions', got {scene.kind!r}")
        if scene.image_id in pred_by_image:
            raise ValueError(f"duplicate prediction image id {scene.image_id!r}")
        if scene.image_id not in truth_by_image:
            raise ValueError(f"prediction image id {scene.image_id!r} has no truth record")
        for entry in scene.boxes:
            if entry.category not in known:
                raise ValueError(
                    f"unknown category id {entry.category!r} in predictions "
                    f"for image {scene.image_id!r}"
                )
        pred_by_image[scene.image_id] = scene

    image_ids = sorted(truth_by_image)
    reports = []
    for threshold in thresholds:
        pooled_scores: dict[str, list[float]] = {c: [] for c in truth_categories}
        pooled_hits: dict[str, list[bool]] = {c: [] for c in truth_categories}
        tp = fp = fn = 0
        for image_id in image_ids:
            truth_scene = truth_by_image[image_id]
            truth_boxes = [_as_truth(entry) for entry in truth_scene.boxes]
            pred_scene = pred_by_image.get(image_id)
            preds = list(pred_scene.boxes) if pred_scene is not None else []
            result = match_greedy(preds, truth_boxes, threshold)
            tp += result.tp_count
            fp += result.fp_count
            fn += result.false_negatives
            for pred, is_tp in zip(preds, result.true_positive):
                if pred.category in truth_categories:
                    pooled_scores[pred.category].append(pred.score)
                    pooled_hits[pred.category].append(is_tp)
        ap: dict[str, float] = {}
        for category in sorted(truth_categories):
            ap[category] = average_precision(
                pooled_scores[category], pooled_hits[category], truth_count[category]
            )
        mean_ap = float(np.mean(list(ap.values()))) if ap else 0.0
        reports.append(
            ThresholdReport(
                iou_threshold=float(threshold),
                ap_per_category=ap,
                mean_ap=mean_ap,
                true_positives=tp,
                false_positives=fp,
                false_negatives=fn,
            )
        )
    aggregate = float(np.mean([r.mean_ap for r in reports]))
    return EvalReport(
        thresholds=tuple(float(t) for t in thresholds),
        per_threshold=tuple(reports),
        mean_ap_over_thresholds=aggregate,
    )


def _as_truth(entry) -> GroundTruthBox:
    if isinstance(entry, GroundTruthBox):
        return entry
    return GroundTruthBox(box=entry.box, category=entry.category)
