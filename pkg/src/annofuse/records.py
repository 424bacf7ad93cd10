"""Domain records shared by the fusion, simulation, metrics, and IO layers."""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite
from typing import Union

from .geometry import Box

RECORD_KINDS = ("ground_truth", "multi_annotator", "fused", "predictions")


@dataclass(frozen=True)
class Annotator:
    """An expert labeler; ``proficiency`` in (0, 1] is their fusion weight."""

    id: str
    proficiency: float = 1.0

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError(f"annotator id must be a non-empty string, got {self.id!r}")
        p = float(self.proficiency)
        if not (isfinite(p) and 0.0 < p <= 1.0):
            raise ValueError(f"proficiency must be in (0, 1], got {self.proficiency!r}")
        object.__setattr__(self, "proficiency", p)


@dataclass(frozen=True)
class GroundTruthBox:
    """A reference box with its true category."""

    box: Box
    category: str


@dataclass(frozen=True)
class AnnotatedBox:
    """A box drawn by one annotator.

    ``weight`` overrides the annotator's proficiency during fusion; leave it
    ``None`` to use the proficiency.
    """

    box: Box
    category: str
    annotator: str
    weight: float | None = None

    def __post_init__(self) -> None:
        if self.weight is not None:
            w = float(self.weight)
            if not (isfinite(w) and w > 0.0):
                raise ValueError(f"weight must be positive and finite, got {self.weight!r}")
            object.__setattr__(self, "weight", w)


@dataclass(frozen=True)
class FusedBox:
    """Consensus box for one cluster of matching annotations.

    ``confidence`` is the agreement score; it stays in (0, 1] under the
    default fusion mode but may exceed 1 in raw-count diagnostics mode.
    """

    box: Box
    category: str
    confidence: float
    cluster_size: int = 1
    contributing_annotators: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        c = float(self.confidence)
        if not (isfinite(c) and c > 0.0):
            raise ValueError(f"confidence must be positive and finite, got {self.confidence!r}")
        object.__setattr__(self, "confidence", c)
        if not isinstance(self.cluster_size, int) or self.cluster_size < 1:
            raise ValueError(f"cluster_size must be an integer >= 1, got {self.cluster_size!r}")
        object.__setattr__(
            self, "contributing_annotators", frozenset(self.contributing_annotators)
        )


@dataclass(frozen=True)
class ScoredBox:
    """A box scored in [0, 1], as produced by a detector or taken from fusion."""

    box: Box
    category: str
    score: float

    def __post_init__(self) -> None:
        s = float(self.score)
        if not (isfinite(s) and 0.0 <= s <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score!r}")
        object.__setattr__(self, "score", s)


BoxEntry = Union[GroundTruthBox, AnnotatedBox, FusedBox, ScoredBox]

_ENTRY_TYPES: dict[str, type] = {
    "ground_truth": GroundTruthBox,
    "multi_annotator": AnnotatedBox,
    "fused": FusedBox,
    "predictions": ScoredBox,
}


@dataclass(frozen=True)
class SceneRecord:
    """One image's annotations of a single ``kind``, with the canvas bounds.

    Every box must lie inside the canvas. The element type of ``boxes``
    follows the kind: GroundTruthBox, AnnotatedBox, FusedBox, or ScoredBox.
    """

    image_id: str
    width: float
    height: float
    kind: str
    boxes: tuple[BoxEntry, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.image_id, str) or not self.image_id:
            raise ValueError(f"image id must be a non-empty string, got {self.image_id!r}")
        if self.kind not in RECORD_KINDS:
            raise ValueError(f"unknown record kind {self.kind!r}; expected one of {RECORD_KINDS}")
        w, h = float(self.width), float(self.height)
        if not (isfinite(w) and w > 0.0 and isfinite(h) and h > 0.0):
            raise ValueError(f"canvas size must be positive and finite, got {self.width!r}x{self.height!r}")
        object.__setattr__(self, "width", w)
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "boxes", tuple(self.boxes))
        entry_type = _ENTRY_TYPES[self.kind]
        for i, entry in enumerate(self.boxes):
            if not isinstance(entry, entry_type):
                raise ValueError(
                    f"{self.kind} record expects {entry_type.__name__} entries, "
                    f"got {type(entry).__name__} at index {i}"
                )
            b = entry.box
            if b.x1 < 0.0 or b.y1 < 0.0 or b.x2 > w or b.y2 > h:
                raise ValueError(
                    f"box {b.as_tuple()} at index {i} exceeds canvas bounds {w}x{h} "
                    f"of image {self.image_id!r}"
                )


def as_predictions(record: SceneRecord) -> SceneRecord:
    """View any scene record as scored predictions.

    Fused boxes keep their agreement confidence as the score; annotator and
    ground-truth boxes get score 1.0. Raw-count fused records (confidence
    above 1) cannot be viewed as predictions and raise ValueError.
    """
    if record.kind == "predictions":
        return record
    scored = []
    for entry in record.boxes:
        score = entry.confidence if isinstance(entry, FusedBox) else 1.0
        scored.append(ScoredBox(box=entry.box, category=entry.category, score=score))
    return SceneRecord(
        image_id=record.image_id,
        width=record.width,
        height=record.height,
        kind="predictions",
        boxes=tuple(scored),
    )
