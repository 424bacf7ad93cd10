"""Axis-aligned box primitives: area, IoU, and weighted coordinate averaging."""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite
from typing import Sequence


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in corner form: (x1, y1) min corner, (x2, y2) max corner.

    Coordinates are real-valued and never rounded here; zero-area boxes are
    allowed, negative extent is not.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        coords = tuple(float(c) for c in (self.x1, self.y1, self.x2, self.y2))
        if not all(isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if coords[2] < coords[0] or coords[3] < coords[1]:
            raise ValueError(f"box must have non-negative extent, got {coords}")
        for name, value in zip(("x1", "y1", "x2", "y2"), coords):
            object.__setattr__(self, name, value)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def area(box: Box) -> float:
    """Area of a box; zero for degenerate (line or point) boxes."""
    return (box.x2 - box.x1) * (box.y2 - box.y1)


def iou(a: Box, b: Box) -> float:
    """Intersection over union, in [0, 1].

    Returns 0.0 when the union has zero area, so two coincident degenerate
    boxes never count as overlapping.
    """
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def weighted_average(boxes: Sequence[Box], weights: Sequence[float]) -> Box:
    """Per-coordinate mean of ``boxes`` weighted by positive ``weights``.

    Every output coordinate lies within the min/max of the corresponding
    input coordinates, and the result is invariant to uniform scaling of
    the weights.
    """
    if len(boxes) == 0:
        raise ValueError("weighted_average requires at least one box")
    if len(boxes) != len(weights):
        raise ValueError(f"got {len(boxes)} boxes but {len(weights)} weights")
    for w in weights:
        if not (isfinite(w) and w > 0.0):
            raise ValueError(f"weights must be positive and finite, got {w!r}")
    total = float(sum(weights))

    def mean(values: list[float]) -> float:
        # Clamping keeps the convex-combination property exact despite
        # floating-point rounding (a lone box stays bit-identical).
        m = sum(w * v for w, v in zip(weights, values)) / total
        return min(max(m, min(values)), max(values))

    return Box(
        mean([b.x1 for b in boxes]),
        mean([b.y1 for b in boxes]),
        mean([b.x2 for b in boxes]),
        mean([b.y2 for b in boxes]),
    )
