"""Detection-loss evaluation with per-box agreement re-weighting.

The base loss is the usual two-term detector objective: a classification
term plus a localization term gated by anchor objectness. The re-weighted
variant scales the whole loss by the fused box's agreement confidence, so
boxes that more annotators agreed on pull harder during training. Both
terms are plug-in replaceable; gradient descent itself lives elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite, log
from typing import Callable, Sequence

from .canonical import canonical_float
from .geometry import Box
from .records import FusedBox, SceneRecord

# Keeps cross-entropy finite when the true class got zero probability.
PROBABILITY_FLOOR = 1e-12

ClsLoss = Callable[[Sequence[float], int], float]
LocLoss = Callable[[Sequence[float], Sequence[float]], float]


@dataclass(frozen=True)
class LossInputs:
    """Everything one anchor-box loss evaluation needs.

    ``class_probs`` must be a probability vector (sum within 1e-6 of 1);
    ``beta`` balances the two loss terms; ``eta`` is the objectness IoU
    threshold; ``confidence`` is the per-box agreement weight in (0, 1].
    """

    class_probs: tuple[float, ...]
    true_class: int
    pred_offsets: tuple[float, float, float, float]
    target_offsets: tuple[float, float, float, float]
    anchor_gt_iou: float
    beta: float = 1.0
    eta: float = 0.5
    confidence: float = 1.0

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.class_probs)
        if not probs:
            raise ValueError("class_probs must be non-empty")
        if any(not isfinite(p) or p < 0.0 for p in probs):
            raise ValueError(f"class probabilities must be finite and >= 0, got {probs}")
        if abs(sum(probs) - 1.0) > 1e-6:
            raise ValueError(f"class probabilities must sum to 1 within 1e-6, got {sum(probs)}")
        object.__setattr__(self, "class_probs", probs)
        if not isinstance(self.true_class, int) or not 0 <= self.true_class < len(probs):
            raise ValueError(f"true_class must index class_probs, got {self.true_class!r}")
        for name in ("pred_offsets", "target_offsets"):
            offsets = tuple(float(v) for v in getattr(self, name))
            if len(offsets) != 4 or any(not isfinite(v) for v in offsets):
                raise ValueError(f"{name} must be 4 finite values, got {offsets}")
            object.__setattr__(self, name, offsets)
        if not (isfinite(self.anchor_gt_iou) and 0.0 <= self.anchor_gt_iou <= 1.0):
            raise ValueError(f"anchor_gt_iou must be in [0, 1], got {self.anchor_gt_iou!r}")
        if not (isfinite(self.beta) and self.beta > 0.0):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if not (isfinite(self.eta) and 0.0 < self.eta < 1.0):
            raise ValueError(f"eta must be in (0, 1), got {self.eta!r}")
        if not (isfinite(self.confidence) and 0.0 < self.confidence <= 1.0):
            raise ValueError(f"confidence must be in (0, 1], got {self.confidence!r}")


def objectness_indicator(anchor_gt_iou: float, eta: float) -> int:
    """1 when the anchor overlaps its ground truth strictly more than ``eta``."""
    if not 0.0 <= anchor_gt_iou <= 1.0:
        raise ValueError(f"anchor_gt_iou must be in [0, 1], got {anchor_gt_iou!r}")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0, 1), got {eta!r}")
    return 1 if anchor_gt_iou > eta else 0


def cross_entropy(class_probs: Sequence[float], true_class: int) -> float:
    """Negative log probability of the true class, floored at 1e-12."""
    return -log(max(float(class_probs[true_class]), PROBABILITY_FLOOR))


def smooth_l1(pred_offsets: Sequence[float], target_offsets: Sequence[float]) -> float:
    """Elementwise smooth-L1 summed over the 4 box offsets."""
    total = 0.0
    for p, t in zip(pred_offsets, target_offsets):
        d = abs(p - t)
        total += 0.5 * d * d if d < 1.0 else d - 0.5
    return total


def base_loss(
    inputs: LossInputs,
    *,
    cls_loss: ClsLoss = cross_entropy,
    loc_loss: LocLoss = smooth_l1,
) -> float:
    """Classification term plus the objectness-gated, beta-weighted localization term."""
    value = cls_loss(inputs.class_probs, inputs.true_class)
    if objectness_indicator(inputs.anchor_gt_iou, inputs.eta):
        value += inputs.beta * loc_loss(inputs.pred_offsets, inputs.target_offsets)
    return value


def earl_loss(
    inputs: LossInputs,
    *,
    cls_loss: ClsLoss = cross_entropy,
    loc_loss: LocLoss = smooth_l1,
) -> float:
    """Agreement-re-weighted loss: ``confidence * base_loss`` (exactly linear in confidence)."""
    return inputs.confidence * base_loss(inputs, cls_loss=cls_loss, loc_loss=loc_loss)


@dataclass(frozen=True)
class WeightEntry:
    """One fused box's training weight, keyed by image."""

    image_id: str
    box: Box
    category: str
    weight: float

    def __post_init__(self) -> None:
        w = float(self.weight)
        if not (isfinite(w) and 0.0 < w <= 1.0):
            raise ValueError(f"weight must be in (0, 1], got {self.weight!r}")
        object.__setattr__(self, "weight", canonical_float(w))
        object.__setattr__(
            self,
            "box",
            Box(*(canonical_float(c) for c in self.box.as_tuple())),
        )


@dataclass(frozen=True)
class WeightExport:
    """Per-box training weights for an external trainer, grouped by image id."""

    entries: tuple[WeightEntry, ...]

    def __post_init__(self) -> None:
        ordered = sorted(self.entries, key=lambda e: e.image_id)
        object.__setattr__(self, "entries", tuple(ordered))


def export_weights(fused_scenes: Sequence[SceneRecord]) -> WeightExport:
    """Turn fused scene records into one weight row per fused box.

    Weights are the agreement confidences, so only default-mode fusion
    output (confidence in (0, 1]) is exportable.
    """
    entries: list[WeightEntry] = []
    for scene in fused_scenes:
        if scene.kind != "fused":
            raise ValueError(f"expected fused records, got kind {scene.kind!r} for image {scene.image_id!r}")
        for entry in scene.boxes:
            assert isinstance(entry, FusedBox)
            entries.append(
                WeightEntry(
                    image_id=scene.image_id,
                    box=entry.box,
                    category=entry.category,
                    weight=entry.confidence,
                )
            )
    return WeightExport(entries=tuple(entries))
