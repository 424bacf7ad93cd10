"""Greedy weighted-box fusion of multi-annotator labels.

Boxes are visited in a canonical order and matched against the growing
list of fused boxes (same category, IoU strictly above the threshold,
highest IoU wins). A matched box joins that cluster and the fused box is
recomputed as the proficiency-weighted mean of the whole cluster; an
unmatched box starts a new cluster. Each fused box finally gets an
agreement confidence from its cluster size and member weights.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import isfinite
from typing import Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .dataset_io import DatasetFile
from .geometry import Box, iou, weighted_average
from .records import AnnotatedBox, Annotator, FusedBox, SceneRecord

CONFIDENCE_MODES = ("normalized_agreement", "raw_count")


@dataclass(frozen=True)
class FusionConfig:
    """Fusion knobs.

    ``num_annotators`` is the declared annotator count N used to normalize
    confidences; ``match_iou_threshold`` is the strict matching bar;
    ``confidence_mode`` selects between the normalized agreement score
    (mean cluster weight * min(T, N) / N, always in (0, 1] for weights
    <= 1) and the raw cluster count (diagnostics only, may exceed 1).
    """

    num_annotators: int
    match_iou_threshold: float = 0.4
    confidence_mode: str = "normalized_agreement"

    def __post_init__(self) -> None:
        if not isinstance(self.num_annotators, int) or self.num_annotators < 1:
            raise ValueError(f"num_annotators must be an integer >= 1, got {self.num_annotators!r}")
        t = self.match_iou_threshold
        if not (isfinite(t) and 0.0 < t < 1.0):
            raise ValueError(f"match_iou_threshold must be in (0, 1), got {t!r}")
        if self.confidence_mode not in CONFIDENCE_MODES:
            raise ValueError(
                f"confidence_mode must be one of {CONFIDENCE_MODES}, got {self.confidence_mode!r}"
            )


@dataclass
class Cluster:
    """Mutable accumulator for one group of matching same-category boxes."""

    members: list[AnnotatedBox] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)

    @property
    def category(self) -> str:
        return self.members[0].category

    @property
    def size(self) -> int:
        return len(self.members)


def fuse_image(
    annotations: Sequence[AnnotatedBox],
    annotators: Sequence[Annotator],
    config: FusionConfig,
) -> list[FusedBox]:
    """Fuse one image's multi-annotator boxes into consensus boxes.

    Deterministic: boxes are visited sorted by (proficiency descending,
    annotator id, input position), and IoU ties keep the earliest fused
    box. Raises ValueError for annotations referencing undeclared
    annotators or when more distinct annotators appear than
    ``config.num_annotators``.
    """
    by_id = {a.id: a for a in annotators}
    if len(by_id) != len(annotators):
        raise ValueError("annotator ids must be unique")
    present = {a.annotator for a in annotations}
    unknown = present - by_id.keys()
    if unknown:
        raise ValueError(f"unknown annotator id(s): {sorted(unknown)}")
    if config.num_annotators < len(present):
        raise ValueError(
            f"num_annotators={config.num_annotators} is less than the "
            f"{len(present)} distinct annotators present"
        )

    order = sorted(
        range(len(annotations)),
        key=lambda i: (-by_id[annotations[i].annotator].proficiency, annotations[i].annotator, i),
    )

    clusters: list[Cluster] = []
    fused_boxes: list[Box] = []
    threshold = config.match_iou_threshold
    for i in order:
        ann = annotations[i]
        weight = ann.weight if ann.weight is not None else by_id[ann.annotator].proficiency
        best = -1
        best_iou = threshold
        for pos, fused in enumerate(fused_boxes):
            if clusters[pos].category != ann.category:
                continue
            overlap = iou(fused, ann.box)
            if overlap > best_iou:  # strict, so IoU ties keep the earliest cluster
                best = pos
                best_iou = overlap
        if best < 0:
            clusters.append(Cluster(members=[ann], weights=[weight]))
            fused_boxes.append(ann.box)
        else:
            cluster = clusters[best]
            cluster.members.append(ann)
            cluster.weights.append(weight)
            fused_boxes[best] = weighted_average(
                [m.box for m in cluster.members], cluster.weights
            )

    n = config.num_annotators
    result = []
    for fused, cluster in zip(fused_boxes, clusters):
        t = cluster.size
        if config.confidence_mode == "raw_count":
            confidence = float(t)
        else:
            confidence = (sum(cluster.weights) / t) * min(t, n) / n
        result.append(
            FusedBox(
                box=fused,
                category=cluster.category,
                confidence=confidence,
                cluster_size=t,
                contributing_annotators=frozenset(m.annotator for m in cluster.members),
            )
        )
    return result


def fuse_scenes(
    scenes: Sequence[SceneRecord],
    annotators: Sequence[Annotator],
    config: FusionConfig,
    *,
    workers: int = 1,
) -> list[SceneRecord]:
    """Fuse every multi-annotator scene independently, preserving image ids.

    ``workers`` > 1 fans scenes out to a thread pool; the output is
    identical for any worker count.
    """
    for scene in scenes:
        if scene.kind != "multi_annotator":
            raise ValueError(
                f"expected multi_annotator records, got kind {scene.kind!r} "
                f"for image {scene.image_id!r}"
            )

    def fuse_one(scene: SceneRecord) -> SceneRecord:
        return SceneRecord(
            image_id=scene.image_id,
            width=scene.width,
            height=scene.height,
            kind="fused",
            boxes=tuple(fuse_image(scene.boxes, annotators, config)),
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fuse_one, scenes))
    return [fuse_one(scene) for scene in scenes]


class WeightedBoxFusion(TransformerMixin, BaseEstimator):
    """Stateless transformer: multi-annotator dataset in, fused dataset out.

    Parameters
    ----------
    match_iou_threshold : float, default=0.4
        Strict IoU bar for a box to join an existing cluster.
    confidence_mode : str, default="normalized_agreement"
        "normalized_agreement" or "raw_count" (see FusionConfig).
    num_annotators : int or None, default=None
        Declared annotator count N; None uses the size of the input
        dataset's annotator table.
    workers : int, default=1
        Thread count for per-image fusion; does not affect the output.
    """

    def __init__(
        self,
        match_iou_threshold: float = 0.4,
        confidence_mode: str = "normalized_agreement",
        num_annotators: int | None = None,
        workers: int = 1,
    ):
        self.match_iou_threshold = match_iou_threshold
        self.confidence_mode = confidence_mode
        self.num_annotators = num_annotators
        self.workers = workers

    def fit(self, X: DatasetFile, y=None) -> "WeightedBoxFusion":
        """No-op beyond validation; fusion is stateless."""
        self._config_for(X)
        return self

    def transform(self, X: DatasetFile) -> DatasetFile:
        """Fuse a multi-annotator DatasetFile into a fused-kind DatasetFile."""
        config = self._config_for(X)
        assert X.annotators is not None
        scenes = fuse_scenes(X.scenes, X.annotators, config, workers=self.workers)
        return DatasetFile(
            kind="fused",
            categories=X.categories,
            scenes=tuple(scenes),
            annotators=X.annotators,
        )

    def _config_for(self, X: DatasetFile) -> FusionConfig:
        if not isinstance(X, DatasetFile):
            raise TypeError(f"expected a DatasetFile, got {type(X).__name__}")
        if X.kind != "multi_annotator":
            raise ValueError(f"expected a multi_annotator dataset, got kind {X.kind!r}")
        n = self.num_annotators
        if n is None:
            n = len(X.annotators) if X.annotators is not None else 1
        return FusionConfig(
            num_annotators=n,
            match_iou_threshold=self.match_iou_threshold,
            confidence_mode=self.confidence_mode,
        )
