"""Tagged, versioned JSON container for annotation datasets.

One file holds one dataset split: a category table, an optional annotator
table, the image table, and a flat annotation list whose required fields
depend on the file ``kind`` (ground_truth, multi_annotator, fused, or
predictions). Serialization is canonical: stable key and record order and
9-significant-digit floats, so equal data always yields equal bytes.

Numeric fields are snapped to their 9-significant-digit value when a
DatasetFile is constructed, which makes write -> parse an exact identity.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from math import isfinite
from pathlib import Path
from typing import Any, IO

from .canonical import canonical_dumps, canonical_float
from .geometry import Box
from .loss import WeightEntry, WeightExport
from .records import (
    RECORD_KINDS,
    AnnotatedBox,
    Annotator,
    BoxEntry,
    FusedBox,
    GroundTruthBox,
    SceneRecord,
    ScoredBox,
)

FORMAT_VERSION = 1
WEIGHTS_KIND = "loss_weights"
DIALECTS = ("corner_form", "width_height_form")

# Kinds whose files may omit the annotators table.
_ANNOTATORS_OPTIONAL = ("ground_truth", "predictions")

# Boxes may stick out of the image by up to this much and get clipped.
_CLIP_TOLERANCE = 1.0


class DatasetError(Exception):
    """Base class for dataset file failures."""


class DatasetParseError(DatasetError):
    """The input is not well-formed JSON (or not decodable text)."""


class DatasetValidationError(DatasetError):
    """Well-formed input that violates the schema contract."""


class DatasetKindError(DatasetValidationError):
    """The file kind differs from the expected kind."""


class DataWarning(UserWarning):
    """Recoverable irregularity, e.g. a box clipped back into image bounds."""


@dataclass(frozen=True)
class Category:
    """A category table row."""

    id: str
    name: str


@dataclass(frozen=True)
class DatasetFile:
    """A fully validated dataset split.

    Construction canonicalizes the value: categories, annotators, and
    scenes are sorted by id and every float is snapped to 9 significant
    digits. Raises DatasetValidationError on any contract violation.
    """

    kind: str
    categories: tuple[Category, ...]
    scenes: tuple[SceneRecord, ...]
    annotators: tuple[Annotator, ...] | None = None
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if self.format_version != FORMAT_VERSION:
            raise DatasetValidationError(
                f"format_version must be {FORMAT_VERSION}, got {self.format_version!r}"
            )
        if self.kind not in RECORD_KINDS:
            raise DatasetValidationError(
                f"kind must be one of {RECORD_KINDS}, got {self.kind!r}"
            )

        categories = tuple(sorted(self.categories, key=lambda c: c.id))
        if len({c.id for c in categories}) != len(categories):
            raise DatasetValidationError("category ids must be unique")
        object.__setattr__(self, "categories", categories)

        annotators = self.annotators
        if annotators is None:
            if self.kind not in _ANNOTATORS_OPTIONAL:
                raise DatasetValidationError(
                    f"{self.kind} datasets require an annotators table"
                )
        else:
            annotators = tuple(
                sorted(
                    (Annotator(a.id, canonical_float(a.proficiency)) for a in annotators),
                    key=lambda a: a.id,
                )
            )
            if len({a.id for a in annotators}) != len(annotators):
                raise DatasetValidationError("annotator ids must be unique")
        object.__setattr__(self, "annotators", annotators)

        scenes = tuple(sorted(self.scenes, key=lambda s: s.image_id))
        if len({s.image_id for s in scenes}) != len(scenes):
            raise DatasetValidationError("image ids must be unique")
        category_ids = {c.id for c in categories}
        annotator_ids = {a.id for a in annotators} if annotators is not None else None
        object.__setattr__(
            self,
            "scenes",
            tuple(self._canonical_scene(s, category_ids, annotator_ids) for s in scenes),
        )

    def _canonical_scene(
        self,
        scene: SceneRecord,
        category_ids: set[str],
        annotator_ids: set[str] | None,
    ) -> SceneRecord:
        if scene.kind != self.kind:
            raise DatasetValidationError(
                f"record kind {scene.kind!r} of image {scene.image_id!r} "
                f"does not match dataset kind {self.kind!r}"
            )
        boxes: list[BoxEntry] = []
        for entry in scene.boxes:
            if entry.category not in category_ids:
                raise DatasetValidationError(
                    f"image {scene.image_id!r}: unknown category id {entry.category!r}"
                )
            box = Box(*(canonical_float(c) for c in entry.box.as_tuple()))
            if isinstance(entry, GroundTruthBox):
                boxes.append(GroundTruthBox(box=box, category=entry.category))
            elif isinstance(entry, AnnotatedBox):
                assert annotator_ids is not None
                if entry.annotator not in annotator_ids:
                    raise DatasetValidationError(
                        f"image {scene.image_id!r}: unknown annotator id {entry.annotator!r}"
                    )
                weight = None if entry.weight is None else canonical_float(entry.weight)
                boxes.append(
                    AnnotatedBox(
                        box=box, category=entry.category,
                        annotator=entry.annotator, weight=weight,
                    )
                )
            elif isinstance(entry, FusedBox):
                if not entry.confidence <= 1.0:
                    raise DatasetValidationError(
                        f"image {scene.image_id!r}: fused confidence must be in (0, 1], "
                        f"got {entry.confidence!r}"
                    )
                if annotator_ids is not None:
                    stray = set(entry.contributing_annotators) - annotator_ids
                    if stray:
                        raise DatasetValidationError(
                            f"image {scene.image_id!r}: unknown contributing annotator "
                            f"id(s) {sorted(stray)}"
                        )
                boxes.append(
                    FusedBox(
                        box=box, category=entry.category,
                        confidence=canonical_float(entry.confidence),
                        cluster_size=entry.cluster_size,
                        contributing_annotators=entry.contributing_annotators,
                    )
                )
            else:
                assert isinstance(entry, ScoredBox)
                boxes.append(
                    ScoredBox(box=box, category=entry.category,
                              score=canonical_float(entry.score))
                )
        return SceneRecord(
            image_id=scene.image_id,
            width=canonical_float(scene.width),
            height=canonical_float(scene.height),
            kind=scene.kind,
            boxes=tuple(boxes),
        )

    def scene(self, image_id: str) -> SceneRecord:
        for record in self.scenes:
            if record.image_id == image_id:
                return record
        raise KeyError(image_id)


def parse(source: str | Path | IO[str] | IO[bytes], expected_kind: str | None = None) -> DatasetFile:
    """Read and fully validate a dataset file from a path or open stream.

    Raises DatasetParseError on malformed input, DatasetKindError when the
    kind disagrees with ``expected_kind``, and DatasetValidationError (with
    the offending record named) on any schema violation. Never raises
    anything outside the DatasetError family, whatever the input bytes.
    """
    return loads(_read_text(source), expected_kind)


def loads(text: str | bytes, expected_kind: str | None = None) -> DatasetFile:
    """Parse a dataset from an in-memory JSON document."""
    return _dataset_from_obj(_load_json(text), expected_kind)


def dumps(dataset: DatasetFile) -> str:
    """Canonical serialization; equal datasets produce byte-equal output."""
    obj: dict[str, Any] = {
        "format_version": dataset.format_version,
        "kind": dataset.kind,
        "categories": [{"id": c.id, "name": c.name} for c in dataset.categories],
    }
    if dataset.annotators is not None:
        obj["annotators"] = [
            {"id": a.id, "proficiency": a.proficiency} for a in dataset.annotators
        ]
    obj["images"] = [
        {"id": s.image_id, "width": s.width, "height": s.height} for s in dataset.scenes
    ]
    annotations: list[dict[str, Any]] = []
    for scene in dataset.scenes:
        for entry in scene.boxes:
            annotations.append(_annotation_obj(scene.image_id, entry))
    obj["annotations"] = annotations
    return canonical_dumps(obj)


def write(dataset: DatasetFile, sink: str | Path | IO[str]) -> None:
    """Serialize canonically to a path or text stream."""
    _write_text(dumps(dataset), sink)


def convert_external(
    source: str | Path | IO[str] | IO[bytes],
    dialect: str,
    kind: str | None = None,
) -> DatasetFile:
    """Ingest an externally produced annotation file.

    ``width_height_form`` converts [x, y, w, h] boxes to corner form;
    ``corner_form`` passes boxes through. Numeric ids are remapped to
    strings, a missing annotators table is synthesized with proficiency
    1.0, and ``kind`` supplies the tag when the file has none.
    """
    if dialect not in DIALECTS:
        raise ValueError(f"unknown dialect {dialect!r}; expected one of {DIALECTS}")
    data = _load_json(_read_text(source))
    top = dict(_as_object(data, "top level"))
    top.setdefault("format_version", FORMAT_VERSION)
    if kind is not None:
        top["kind"] = kind

    for i, cat in enumerate(_as_array(top.get("categories", []), "categories")):
        cat = _as_object(cat, f"categories[{i}]")
        cat["id"] = _coerce_id(cat.get("id"), f"categories[{i}].id")
        cat.setdefault("name", cat["id"])
    for i, img in enumerate(_as_array(top.get("images", []), "images")):
        img = _as_object(img, f"images[{i}]")
        img["id"] = _coerce_id(img.get("id"), f"images[{i}].id")

    seen_annotators: list[str] = []
    for i, ann in enumerate(_as_array(top.get("annotations", []), "annotations")):
        ann = _as_object(ann, f"annotations[{i}]")
        ctx = f"annotations[{i}]"
        ann["image_id"] = _coerce_id(ann.get("image_id"), f"{ctx}.image_id")
        ann["category_id"] = _coerce_id(ann.get("category_id"), f"{ctx}.category_id")
        if "annotator_id" in ann:
            ann["annotator_id"] = _coerce_id(ann["annotator_id"], f"{ctx}.annotator_id")
            if ann["annotator_id"] not in seen_annotators:
                seen_annotators.append(ann["annotator_id"])
        if dialect == "width_height_form":
            bbox = _as_array(ann.get("bbox"), f"{ctx}.bbox")
            if len(bbox) != 4:
                raise DatasetValidationError(f"{ctx}.bbox must have 4 entries, got {len(bbox)}")
            x, y, w, h = (_as_number(v, f"{ctx}.bbox[{j}]") for j, v in enumerate(bbox))
            if w < 0 or h < 0:
                raise DatasetValidationError(f"{ctx}.bbox width/height must be >= 0, got {w}x{h}")
            ann["bbox"] = [x, y, x + w, y + h]

    if "annotators" in top:
        for i, person in enumerate(_as_array(top["annotators"], "annotators")):
            person = _as_object(person, f"annotators[{i}]")
            person["id"] = _coerce_id(person.get("id"), f"annotators[{i}].id")
    elif top.get("kind") not in _ANNOTATORS_OPTIONAL and seen_annotators:
        top["annotators"] = [{"id": a, "proficiency": 1.0} for a in seen_annotators]

    return _dataset_from_obj(top, kind)


def weights_dumps(export: WeightExport) -> str:
    """Canonical serialization of a per-box weight export."""
    obj = {
        "format_version": FORMAT_VERSION,
        "kind": WEIGHTS_KIND,
        "entries": [
            {
                "image_id": e.image_id,
                "category_id": e.category,
                "bbox": list(e.box.as_tuple()),
                "weight": e.weight,
            }
            for e in export.entries
        ],
    }
    return canonical_dumps(obj)


def write_weights(export: WeightExport, sink: str | Path | IO[str]) -> None:
    """Serialize a weight export to a path or text stream."""
    _write_text(weights_dumps(export), sink)


def read_weights(source: str | Path | IO[str] | IO[bytes]) -> WeightExport:
    """Parse a weight-export file; raises within the DatasetError family only."""
    top = _as_object(_load_json(_read_text(source)), "top level")
    version = top.get("format_version")
    if version != FORMAT_VERSION or isinstance(version, bool):
        raise DatasetValidationError(f"format_version must be {FORMAT_VERSION}, got {version!r}")
    if top.get("kind") != WEIGHTS_KIND:
        raise DatasetKindError(f"expected kind {WEIGHTS_KIND!r}, found {top.get('kind')!r}")
    entries = []
    for i, raw in enumerate(_as_array(top.get("entries"), "entries")):
        ctx = f"entries[{i}]"
        obj = _as_object(raw, ctx)
        box = _box_from_field(obj.get("bbox"), f"{ctx}.bbox")
        weight = _as_number(obj.get("weight"), f"{ctx}.weight")
        if not 0.0 < weight <= 1.0:
            raise DatasetValidationError(f"{ctx}.weight must be in (0, 1], got {weight}")
        entries.append(
            WeightEntry(
                image_id=_as_string(obj.get("image_id"), f"{ctx}.image_id"),
                box=box,
                category=_as_string(obj.get("category_id"), f"{ctx}.category_id"),
                weight=weight,
            )
        )
    return WeightExport(entries=tuple(entries))


# --- structural validation helpers -------------------------------------------


def _load_json(text: str | bytes) -> Any:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DatasetParseError(f"input is not valid UTF-8: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetParseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _read_text(source: str | Path | IO[str] | IO[bytes]) -> str | bytes:
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    data = source.read()
    if not isinstance(data, (str, bytes)):
        raise DatasetParseError(f"stream produced {type(data).__name__}, expected text or bytes")
    return data


def _write_text(text: str, sink: str | Path | IO[str]) -> None:
    if isinstance(sink, (str, Path)):
        Path(sink).write_text(text, encoding="utf-8")
    else:
        sink.write(text)


def _as_object(value: Any, ctx: str) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise DatasetValidationError(f"{ctx} must be an object, got {type(value).__name__}")
    return value


def _as_array(value: Any, ctx: str) -> list[Any]:
    if not isinstance(value, list):
        raise DatasetValidationError(f"{ctx} must be an array, got {type(value).__name__}")
    return value


def _as_string(value: Any, ctx: str) -> str:
    if not isinstance(value, str) or not value:
        raise DatasetValidationError(f"{ctx} must be a non-empty string, got {value!r}")
    return value


def _as_number(value: Any, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DatasetValidationError(f"{ctx} must be a number, got {value!r}")
    v = float(value)
    if not isfinite(v):
        raise DatasetValidationError(f"{ctx} must be finite, got {value!r}")
    return v


def _as_int(value: Any, ctx: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DatasetValidationError(f"{ctx} must be an integer, got {value!r}")
    return value


def _coerce_id(value: Any, ctx: str) -> str:
    if isinstance(value, str) and value:
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    raise DatasetValidationError(f"{ctx} must be a string or integer id, got {value!r}")


def _box_from_field(value: Any, ctx: str) -> Box:
    bbox = _as_array(value, ctx)
    if len(bbox) != 4:
        raise DatasetValidationError(f"{ctx} must have 4 entries, got {len(bbox)}")
    x1, y1, x2, y2 = (_as_number(v, f"{ctx}[{i}]") for i, v in enumerate(bbox))
    if x2 < x1 or y2 < y1:
        raise DatasetValidationError(f"{ctx} has negative extent: {[x1, y1, x2, y2]}")
    return Box(x1, y1, x2, y2)


def _clip_box(box: Box, width: float, height: float, ctx: str) -> Box:
    over = max(0.0 - box.x1, 0.0 - box.y1, box.x2 - width, box.y2 - height)
    if over <= 0.0:
        return box
    if over > _CLIP_TOLERANCE:
        raise DatasetValidationError(
            f"{ctx}: bbox {box.as_tuple()} exceeds image bounds {width}x{height} "
            f"by {over} (> {_CLIP_TOLERANCE})"
        )
    warnings.warn(
        f"{ctx}: bbox {box.as_tuple()} clipped to image bounds {width}x{height}",
        DataWarning,
        stacklevel=4,
    )
    return Box(
        min(max(box.x1, 0.0), width),
        min(max(box.y1, 0.0), height),
        min(max(box.x2, 0.0), width),
        min(max(box.y2, 0.0), height),
    )


def _dataset_from_obj(data: Any, expected_kind: str | None) -> DatasetFile:
    top = _as_object(data, "top level")

    version = top.get("format_version")
    if isinstance(version, bool) or version != FORMAT_VERSION:
        raise DatasetValidationError(f"format_version must be {FORMAT_VERSION}, got {version!r}")

    kind = top.get("kind")
    if not isinstance(kind, str) or kind not in RECORD_KINDS:
        raise DatasetValidationError(f"kind must be one of {RECORD_KINDS}, got {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise DatasetKindError(f"expected kind {expected_kind!r}, found {kind!r}")

    categories = []
    for i, raw in enumerate(_as_array(top.get("categories"), "categories")):
        obj = _as_object(raw, f"categories[{i}]")
        categories.append(
            Category(
                id=_as_string(obj.get("id"), f"categories[{i}].id"),
                name=_as_string(obj.get("name"), f"categories[{i}].name"),
            )
        )
    category_ids = {c.id for c in categories}
    if len(category_ids) != len(categories):
        raise DatasetValidationError("categories: duplicate ids")

    annotators: list[Annotator] | None = None
    if "annotators" in top:
        annotators = []
        for i, raw in enumerate(_as_array(top["annotators"], "annotators")):
            obj = _as_object(raw, f"annotators[{i}]")
            ann_id = _as_string(obj.get("id"), f"annotators[{i}].id")
            if "proficiency" in obj:
                proficiency = _as_number(obj["proficiency"], f"annotators[{i}].proficiency")
            else:
                proficiency = 1.0
            if not 0.0 < proficiency <= 1.0:
                raise DatasetValidationError(
                    f"annotators[{i}].proficiency must be in (0, 1], got {proficiency}"
                )
            annotators.append(Annotator(id=ann_id, proficiency=proficiency))
        if len({a.id for a in annotators}) != len(annotators):
            raise DatasetValidationError("annotators: duplicate ids")
    elif kind not in _ANNOTATORS_OPTIONAL:
        raise DatasetValidationError(f"{kind} datasets require an annotators table")
    annotator_ids = {a.id for a in annotators} if annotators is not None else set()

    images: dict[str, tuple[float, float]] = {}
    image_order: list[str] = []
    for i, raw in enumerate(_as_array(top.get("images"), "images")):
        obj = _as_object(raw, f"images[{i}]")
        image_id = _as_string(obj.get("id"), f"images[{i}].id")
        if image_id in images:
            raise DatasetValidationError(f"images[{i}]: duplicate image id {image_id!r}")
        width = _as_number(obj.get("width"), f"images[{i}].width")
        height = _as_number(obj.get("height"), f"images[{i}].height")
        if width <= 0 or height <= 0:
            raise DatasetValidationError(
                f"images[{i}]: width/height must be positive, got {width}x{height}"
            )
        images[image_id] = (width, height)
        image_order.append(image_id)

    grouped: dict[str, list[BoxEntry]] = {image_id: [] for image_id in image_order}
    for i, raw in enumerate(_as_array(top.get("annotations"), "annotations")):
        ctx = f"annotations[{i}]"
        obj = _as_object(raw, ctx)
        image_id = _as_string(obj.get("image_id"), f"{ctx}.image_id")
        if image_id not in images:
            raise DatasetValidationError(f"{ctx}: unknown image id {image_id!r}")
        category = _as_string(obj.get("category_id"), f"{ctx}.category_id")
        if category not in category_ids:
            raise DatasetValidationError(f"{ctx}: unknown category id {category!r}")
        width, height = images[image_id]
        box = _clip_box(_box_from_field(obj.get("bbox"), f"{ctx}.bbox"), width, height, ctx)
        grouped[image_id].append(_entry_from_obj(obj, kind, box, category, annotator_ids, ctx))

    scenes = tuple(
        SceneRecord(
            image_id=image_id,
            width=images[image_id][0],
            height=images[image_id][1],
            kind=kind,
            boxes=tuple(grouped[image_id]),
        )
        for image_id in image_order
    )
    return DatasetFile(
        kind=kind,
        categories=tuple(categories),
        scenes=scenes,
        annotators=None if annotators is None else tuple(annotators),
    )


def _entry_from_obj(
    obj: dict[str, Any],
    kind: str,
    box: Box,
    category: str,
    annotator_ids: set[str],
    ctx: str,
) -> BoxEntry:
    if kind == "ground_truth":
        return GroundTruthBox(box=box, category=category)
    if kind == "multi_annotator":
        annotator = _as_string(obj.get("annotator_id"), f"{ctx}.annotator_id")
        if annotator not in annotator_ids:
            raise DatasetValidationError(f"{ctx}: unknown annotator id {annotator!r}")
        weight = None
        if "weight" in obj:
            weight = _as_number(obj["weight"], f"{ctx}.weight")
            if weight <= 0:
                raise DatasetValidationError(f"{ctx}.weight must be positive, got {weight}")
        return AnnotatedBox(box=box, category=category, annotator=annotator, weight=weight)
    if kind == "fused":
        confidence = _as_number(obj.get("confidence"), f"{ctx}.confidence")
        if not 0.0 < confidence <= 1.0:
            raise DatasetValidationError(f"{ctx}.confidence must be in (0, 1], got {confidence}")
        cluster_size = 1
        if "cluster_size" in obj:
            cluster_size = _as_int(obj["cluster_size"], f"{ctx}.cluster_size")
            if cluster_size < 1:
                raise DatasetValidationError(f"{ctx}.cluster_size must be >= 1, got {cluster_size}")
        contributing: list[str] = []
        if "contributing_annotators" in obj:
            for j, name in enumerate(_as_array(obj["contributing_annotators"], f"{ctx}.contributing_annotators")):
                contributing.append(_as_string(name, f"{ctx}.contributing_annotators[{j}]"))
        return FusedBox(
            box=box,
            category=category,
            confidence=confidence,
            cluster_size=cluster_size,
            contributing_annotators=frozenset(contributing),
        )
    assert kind == "predictions"
    score = _as_number(obj.get("score"), f"{ctx}.score")
    if not 0.0 <= score <= 1.0:
        raise DatasetValidationError(f"{ctx}.score must be in [0, 1], got {score}")
    return ScoredBox(box=box, category=category, score=score)


def _annotation_obj(image_id: str, entry: BoxEntry) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "image_id": image_id,
        "category_id": entry.category,
        "bbox": list(entry.box.as_tuple()),
    }
    if isinstance(entry, AnnotatedBox):
        obj["annotator_id"] = entry.annotator
        if entry.weight is not None:
            obj["weight"] = entry.weight
    elif isinstance(entry, FusedBox):
        obj["confidence"] = entry.confidence
        obj["cluster_size"] = entry.cluster_size
        obj["contributing_annotators"] = sorted(entry.contributing_annotators)
    elif isinstance(entry, ScoredBox):
        obj["score"] = entry.score
    return obj
