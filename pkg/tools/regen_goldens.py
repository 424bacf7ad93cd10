"""Regenerate the golden files under tests/golden/.

Run from the repository root:  python3 tools/regen_goldens.py
"""

from __future__ import annotations

from pathlib import Path

from click.testing import CliRunner

from annofuse import (
    AnnotatedBox,
    Annotator,
    Box,
    Category,
    DatasetFile,
    GroundTruthBox,
    SceneRecord,
    WeightedBoxFusion,
    as_predictions,
    export_weights,
    weights_dumps,
    write,
)
from annofuse.cli import main

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"

CATEGORIES = (
    Category("effusion", "pleural effusion"),
    Category("nodule", "nodule or mass"),
    Category("opacity", "lung opacity"),
)
READERS = (
    Annotator("reader_a", 0.8),
    Annotator("reader_b", 0.8),
    Annotator("reader_c", 0.8),
)


def ann(x1, y1, x2, y2, category, reader):
    return AnnotatedBox(box=Box(x1, y1, x2, y2), category=category, annotator=reader)


def gt(x1, y1, x2, y2, category):
    return GroundTruthBox(box=Box(x1, y1, x2, y2), category=category)


def build_multi_annotator() -> DatasetFile:
    study1 = SceneRecord(
        image_id="study_0001", width=256, height=256, kind="multi_annotator",
        boxes=(
            ann(20, 20, 60, 60, "opacity", "reader_a"),
            ann(22, 21, 61, 62, "opacity", "reader_b"),
            ann(19, 18, 59, 58, "opacity", "reader_c"),
            ann(100, 100, 150, 140, "nodule", "reader_a"),
            ann(101, 99, 149, 142, "nodule", "reader_b"),
            ann(102, 101, 151, 141, "nodule", "reader_c"),
            ann(180, 30, 220, 80, "effusion", "reader_b"),
        ),
    )
    study2 = SceneRecord(
        image_id="study_0002", width=256, height=256, kind="multi_annotator",
        boxes=(
            ann(40, 120, 90, 180, "effusion", "reader_a"),
            ann(42, 118, 92, 178, "effusion", "reader_c"),
            ann(140, 40, 200, 90, "opacity", "reader_b"),
        ),
    )
    return DatasetFile(
        kind="multi_annotator", categories=CATEGORIES,
        scenes=(study1, study2), annotators=READERS,
    )


def build_ground_truth() -> DatasetFile:
    study1 = SceneRecord(
        image_id="study_0001", width=256, height=256, kind="ground_truth",
        boxes=(
            gt(20, 20, 60, 60, "opacity"),
            gt(100, 100, 150, 140, "nodule"),
            gt(180, 30, 220, 80, "effusion"),
        ),
    )
    study2 = SceneRecord(
        image_id="study_0002", width=256, height=256, kind="ground_truth",
        boxes=(
            gt(41, 119, 91, 179, "effusion"),
            gt(140, 40, 200, 90, "opacity"),
        ),
    )
    return DatasetFile(kind="ground_truth", categories=CATEGORIES, scenes=(study1, study2))


def main_regen() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    multi = build_multi_annotator()
    write(multi, GOLDEN / "multi_annotator.json")

    truth = build_ground_truth()
    write(truth, GOLDEN / "ground_truth.json")

    fused = WeightedBoxFusion().transform(multi)
    write(fused, GOLDEN / "fused.json")

    predictions = DatasetFile(
        kind="predictions",
        categories=fused.categories,
        scenes=tuple(as_predictions(s) for s in fused.scenes),
    )
    write(predictions, GOLDEN / "predictions.json")

    (GOLDEN / "loss_weights.json").write_text(
        weights_dumps(export_weights(fused.scenes)), encoding="utf-8"
    )

    help_dir = GOLDEN / "help"
    help_dir.mkdir(exist_ok=True)
    runner = CliRunner()
    for name, args in {
        "main": ["--help"],
        "simulate": ["simulate", "--help"],
        "fuse": ["fuse", "--help"],
        "eval": ["eval", "--help"],
        "loss-weights": ["loss-weights", "--help"],
        "render": ["render", "--help"],
    }.items():
        result = runner.invoke(main, args, prog_name="annofuse")
        assert result.exit_code == 0, result.output
        (help_dir / f"{name}.txt").write_text(result.output, encoding="utf-8")
    print(f"regenerated goldens in {GOLDEN}")


if __name__ == "__main__":
    main_regen()
