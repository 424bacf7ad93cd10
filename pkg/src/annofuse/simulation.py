"""Synthetic multi-expert annotation sets from generated ground truth.

Each simulated expert gets a row-stochastic transition matrix over true
categories with an extra miss outcome (``no_obj``): per object, the
sampled outcome either relabels the box or drops it. Kept boxes are
jittered under an IoU floor. A single proficiency knob drives both the
expected matrix diagonal and the default jitter floor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import isfinite
from typing import Mapping

import numpy as np

from .geometry import Box, area, iou
from .records import AnnotatedBox, Annotator, GroundTruthBox, SceneRecord

logger = logging.getLogger(__name__)

NO_OBJ = "no_obj"

# Ground-truth objects are placed so that no pair overlaps more than this.
_MAX_GT_OVERLAP = 0.3
_PLACEMENT_ATTEMPTS = 1000

# Distinct seed-stream tags so matrices, scenes, and expert draws never collide.
_MATRIX_STREAM = 1
_SCENE_STREAM = 2
_EXPERT_STREAM = 3


@dataclass(frozen=True)
class TransitionMatrix:
    """Category-confusion matrix for one expert.

    ``entries`` has one row per true category and C+1 columns: the C
    category outcomes plus the trailing ``no_obj`` miss column. Rows sum
    to 1 within 1e-9. Matrices produced by ``build_transition_matrix``
    additionally keep every diagonal in [0.5, 1] and dominant within its
    row; hand-built matrices may model harsher experts (e.g. a certain
    miss for one category).
    """

    expert_id: str
    categories: tuple[str, ...]
    entries: np.ndarray

    def __post_init__(self) -> None:
        if not self.categories:
            raise ValueError("categories must be non-empty")
        entries = np.asarray(self.entries, dtype=np.float64)
        c = len(self.categories)
        if entries.shape != (c, c + 1):
            raise ValueError(f"entries must have shape {(c, c + 1)}, got {entries.shape}")
        if not np.all(np.isfinite(entries)) or np.any(entries < 0.0):
            raise ValueError("entries must be finite and >= 0")
        sums = entries.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError(f"rows must sum to 1 within 1e-9, got sums {sums}")
        entries = entries.copy()
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "categories", tuple(self.categories))

    @property
    def outcome_labels(self) -> tuple[str, ...]:
        return self.categories + (NO_OBJ,)


@dataclass(frozen=True)
class SimConfig:
    """All simulation knobs; the seed fully determines the output.

    ``proficiency`` sets the transition-matrix diagonal mean and, unless
    ``jitter_iou_floor`` overrides it, the box-jitter IoU floor. A floor
    of exactly 1.0 means no jitter (boxes are copied verbatim).
    """

    num_scenes: int = 100
    num_experts: int = 3
    proficiency: float = 0.8
    diag_stddev: float = 0.05
    jitter_iou_floor: float | None = None
    num_categories: int = 10
    canvas_width: float = 256.0
    canvas_height: float = 256.0
    objects_per_scene: tuple[int, int] = (1, 5)
    object_size_range: tuple[float, float] = (20.0, 60.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.num_scenes, int) or self.num_scenes < 0:
            raise ValueError(f"num_scenes must be an integer >= 0, got {self.num_scenes!r}")
        if not isinstance(self.num_experts, int) or self.num_experts < 1:
            raise ValueError(f"num_experts must be an integer >= 1, got {self.num_experts!r}")
        if not (isfinite(self.proficiency) and 0.0 < self.proficiency < 1.0):
            raise ValueError(f"proficiency must be in (0, 1), got {self.proficiency!r}")
        if not (isfinite(self.diag_stddev) and self.diag_stddev >= 0.0):
            raise ValueError(f"diag_stddev must be >= 0, got {self.diag_stddev!r}")
        if self.jitter_iou_floor is not None and not (
            isfinite(self.jitter_iou_floor) and 0.0 < self.jitter_iou_floor <= 1.0
        ):
            raise ValueError(f"jitter_iou_floor must be in (0, 1], got {self.jitter_iou_floor!r}")
        if not isinstance(self.num_categories, int) or self.num_categories < 1:
            raise ValueError(f"num_categories must be an integer >= 1, got {self.num_categories!r}")
        if not (self.canvas_width > 0 and self.canvas_height > 0):
            raise ValueError("canvas dimensions must be positive")
        lo, hi = self.objects_per_scene
        if not (isinstance(lo, int) and isinstance(hi, int) and 0 <= lo <= hi):
            raise ValueError(f"objects_per_scene must be a range 0 <= lo <= hi, got {self.objects_per_scene!r}")
        slo, shi = self.object_size_range
        if not (0.0 < slo <= shi <= min(self.canvas_width, self.canvas_height)):
            raise ValueError(
                f"object_size_range must satisfy 0 < lo <= hi <= canvas side, got {self.object_size_range!r}"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @property
    def effective_jitter_floor(self) -> float:
        return self.proficiency if self.jitter_iou_floor is None else self.jitter_iou_floor


@dataclass(frozen=True)
class SimulatedDataset:
    """Ground truth plus per-expert annotation sets and their matrices."""

    ground_truth: tuple[SceneRecord, ...]
    expert_scenes: Mapping[str, tuple[SceneRecord, ...]]
    annotators: tuple[Annotator, ...]
    matrices: tuple[TransitionMatrix, ...]
    categories: tuple[str, ...]

    def combined_scenes(self) -> tuple[SceneRecord, ...]:
        """All experts' annotations merged per image, in expert order."""
        merged = []
        for i, truth in enumerate(self.ground_truth):
            boxes: list[AnnotatedBox] = []
            for annotator in self.annotators:
                boxes.extend(self.expert_scenes[annotator.id][i].boxes)
            merged.append(
                SceneRecord(
                    image_id=truth.image_id,
                    width=truth.width,
                    height=truth.height,
                    kind="multi_annotator",
                    boxes=tuple(boxes),
                )
            )
        return tuple(merged)


def category_ids(config: SimConfig) -> tuple[str, ...]:
    return tuple(str(i) for i in range(config.num_categories))


def expert_ids(config: SimConfig) -> tuple[str, ...]:
    return tuple(f"E{k + 1}" for k in range(config.num_experts))


def build_transition_matrix(
    expert_index: int, config: SimConfig, rng: np.random.Generator
) -> TransitionMatrix:
    """Draw one expert's confusion matrix.

    Per row, the diagonal is a normal draw around the proficiency, clamped
    to [0.5, 1]; the leftover mass is spread uniformly over the C other
    outcomes (wrong categories plus the miss column).
    """
    cats = category_ids(config)
    c = len(cats)
    entries = np.empty((c, c + 1), dtype=np.float64)
    alphas = rng.normal(config.proficiency, config.diag_stddev, size=c)
    for i, alpha in enumerate(alphas):
        diagonal = min(max(0.5, float(alpha)), 1.0)
        entries[i, :] = (1.0 - diagonal) / c
        entries[i, i] = diagonal
    return TransitionMatrix(
        expert_id=f"E{expert_index + 1}", categories=cats, entries=entries
    )


def jitter_box(
    true_box: Box,
    iou_floor: float,
    canvas: tuple[float, float],
    rng: np.random.Generator,
    *,
    initial_amplitude: float = 0.15,
    rejections_per_halving: int = 20,
) -> Box:
    """Sample a canvas-clipped box whose IoU with ``true_box`` exceeds the floor.

    Rejection sampling with per-coordinate uniform noise proportional to
    the box side; the amplitude halves after every ``rejections_per_halving``
    misses, which drives the IoU to 1 and guarantees termination.
    """
    if not 0.0 < iou_floor < 1.0:
        raise ValueError(f"iou_floor must be in (0, 1), got {iou_floor!r}")
    if area(true_box) <= 0.0:
        raise ValueError(f"true_box must have positive area, got {true_box.as_tuple()}")
    if not 0.0 < initial_amplitude < 0.5:
        raise ValueError(f"initial_amplitude must be in (0, 0.5), got {initial_amplitude!r}")
    width, height = canvas
    bw, bh = true_box.width, true_box.height
    amplitude = initial_amplitude
    rejections = 0
    while True:
        noise = rng.uniform(-amplitude, amplitude, size=4)
        candidate = Box(
            min(max(true_box.x1 + noise[0] * bw, 0.0), width),
            min(max(true_box.y1 + noise[1] * bh, 0.0), height),
            min(max(true_box.x2 + noise[2] * bw, 0.0), width),
            min(max(true_box.y2 + noise[3] * bh, 0.0), height),
        )
        if iou(candidate, true_box) > iou_floor:
            return candidate
        rejections += 1
        if rejections % rejections_per_halving == 0:
            amplitude *= 0.5


def simulate_expert(
    scene: SceneRecord,
    matrix: TransitionMatrix,
    config: SimConfig,
    rng: np.random.Generator,
) -> list[AnnotatedBox]:
    """One expert's take on a ground-truth scene.

    Per object: sample an outcome from the object's category row; a miss
    drops the box, anything else keeps a (jittered) box under the sampled
    category. Experts never invent boxes.
    """
    if scene.kind != "ground_truth":
        raise ValueError(f"expected a ground_truth record, got kind {scene.kind!r}")
    if len(matrix.categories) != config.num_categories:
        raise ValueError(
            f"matrix covers {len(matrix.categories)} categories, config says {config.num_categories}"
        )
    index = {cat: i for i, cat in enumerate(matrix.categories)}
    c = len(matrix.categories)
    floor = config.effective_jitter_floor
    result: list[AnnotatedBox] = []
    for gt in scene.boxes:
        assert isinstance(gt, GroundTruthBox)
        row = matrix.entries[index[gt.category]]
        outcome = int(rng.choice(c + 1, p=row))
        if outcome == c:  # no_obj: the expert missed this object
            continue
        if floor >= 1.0:
            box = gt.box
        else:
            box = jitter_box(gt.box, floor, (scene.width, scene.height), rng)
        result.append(
            AnnotatedBox(box=box, category=matrix.categories[outcome], annotator=matrix.expert_id)
        )
    return result


def generate_dataset(config: SimConfig) -> SimulatedDataset:
    """Generate ground truth and R expert annotation sets, fully seeded.

    Scene geometry and every expert's draws run on independent RNG streams
    derived from (seed, stream, scene index[, expert index]), so identical
    configs give byte-identical datasets regardless of evaluation order.
    """
    matrices = tuple(
        build_transition_matrix(k, config, _stream(config.seed, _MATRIX_STREAM, k))
        for k in range(config.num_experts)
    )
    annotators = tuple(Annotator(m.expert_id, config.proficiency) for m in matrices)
    cats = category_ids(config)

    ground_truth: list[SceneRecord] = []
    per_expert: dict[str, list[SceneRecord]] = {m.expert_id: [] for m in matrices}
    for i in range(config.num_scenes):
        scene = _generate_scene(i, cats, config, _stream(config.seed, _SCENE_STREAM, i))
        ground_truth.append(scene)
        for k, matrix in enumerate(matrices):
            boxes = simulate_expert(
                scene, matrix, config, _stream(config.seed, _EXPERT_STREAM, i, k)
            )
            per_expert[matrix.expert_id].append(
                SceneRecord(
                    image_id=scene.image_id,
                    width=scene.width,
                    height=scene.height,
                    kind="multi_annotator",
                    boxes=tuple(boxes),
                )
            )
    return SimulatedDataset(
        ground_truth=tuple(ground_truth),
        expert_scenes={k: tuple(v) for k, v in per_expert.items()},
        annotators=annotators,
        matrices=matrices,
        categories=cats,
    )


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng([seed, *key])


def _generate_scene(
    index: int, cats: tuple[str, ...], config: SimConfig, rng: np.random.Generator
) -> SceneRecord:
    image_id = f"scene_{index:06d}"
    lo, hi = config.objects_per_scene
    count = int(rng.integers(lo, hi + 1))
    placed: list[GroundTruthBox] = []
    for _ in range(count):
        box: Box | None = None
        for _attempt in range(_PLACEMENT_ATTEMPTS):
            w = float(rng.uniform(*config.object_size_range))
            h = float(rng.uniform(*config.object_size_range))
            x1 = float(rng.uniform(0.0, config.canvas_width - w))
            y1 = float(rng.uniform(0.0, config.canvas_height - h))
            candidate = Box(
                x1, y1,
                min(x1 + w, config.canvas_width),
                min(y1 + h, config.canvas_height),
            )
            if all(iou(candidate, g.box) <= _MAX_GT_OVERLAP for g in placed):
                box = candidate
                break
        if box is None:
            logger.warning(
                "%s: skipped an object after %d placement attempts",
                image_id, _PLACEMENT_ATTEMPTS,
            )
            continue
        category = cats[int(rng.integers(0, len(cats)))]
        placed.append(GroundTruthBox(box=box, category=category))
    return SceneRecord(
        image_id=image_id,
        width=config.canvas_width,
        height=config.canvas_height,
        kind="ground_truth",
        boxes=tuple(placed),
    )
