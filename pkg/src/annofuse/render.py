"""Static SVG overlays of scene annotations.

Multi-annotator scenes are colored per annotator; other kinds per
category. Fused boxes are labeled with their confidence to two decimals,
predictions with their score. Output is plain SVG text built without
external dependencies.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .dataset_io import DatasetFile
from .records import AnnotatedBox, FusedBox, SceneRecord, ScoredBox

PALETTE = (
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
    "#a65628", "#f781bf", "#17becf", "#bcbd22", "#666666",
)

_LEGEND_WIDTH = 150
_LEGEND_ROW = 18
_FONT = "font-family=\"sans-serif\""


def render_scene(dataset: DatasetFile, image_id: str) -> str:
    """Render one image's annotations as an SVG document string."""
    try:
        scene = dataset.scene(image_id)
    except KeyError:
        raise ValueError(f"image id {image_id!r} not found in dataset") from None

    if dataset.kind == "multi_annotator":
        keys = [a.id for a in dataset.annotators or ()]
    else:
        keys = [c.id for c in dataset.categories]
    colors = {key: PALETTE[i % len(PALETTE)] for i, key in enumerate(sorted(keys))}

    present = sorted({_group_key(scene, entry) for entry in scene.boxes})
    width = scene.width + _LEGEND_WIDTH
    height = max(scene.height, _LEGEND_ROW * (len(present) + 2))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" '
        f'height="{_num(height)}" viewBox="0 0 {_num(width)} {_num(height)}">',
        f'  <rect x="0" y="0" width="{_num(scene.width)}" height="{_num(scene.height)}" '
        f'fill="white" stroke="#999999" stroke-width="1"/>',
    ]
    for entry in scene.boxes:
        color = colors.get(_group_key(scene, entry), "#000000")
        b = entry.box
        parts.append(
            f'  <rect x="{_num(b.x1)}" y="{_num(b.y1)}" width="{_num(b.width)}" '
            f'height="{_num(b.height)}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        label = _label(entry)
        if label:
            parts.append(
                f'  <text x="{_num(b.x1 + 2)}" y="{_num(max(b.y1 - 3, 10.0))}" '
                f'{_FONT} font-size="10" fill="{color}">{escape(label)}</text>'
            )

    legend_x = scene.width + 10
    parts.append(
        f'  <text x="{_num(legend_x)}" y="{_LEGEND_ROW}" {_FONT} font-size="11" '
        f'font-weight="bold" fill="#000000">{escape(_legend_title(dataset.kind))}</text>'
    )
    for i, key in enumerate(present):
        y = _LEGEND_ROW * (i + 2)
        color = colors.get(key, "#000000")
        parts.append(
            f'  <rect x="{_num(legend_x)}" y="{y - 9}" width="10" height="10" fill="{color}"/>'
        )
        parts.append(
            f'  <text x="{_num(legend_x + 14)}" y="{y}" {_FONT} font-size="11" '
            f'fill="#000000">{escape(key)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _group_key(scene: SceneRecord, entry) -> str:
    if isinstance(entry, AnnotatedBox):
        return entry.annotator
    return entry.category


def _label(entry) -> str:
    if isinstance(entry, FusedBox):
        return f"{entry.confidence:.2f}"
    if isinstance(entry, ScoredBox):
        return f"{entry.score:.2f}"
    return entry.category


def _legend_title(kind: str) -> str:
    return "annotators" if kind == "multi_annotator" else "categories"


def _num(x: float) -> str:
    return format(float(x), ".9g")
