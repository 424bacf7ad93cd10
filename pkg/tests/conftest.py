from pathlib import Path

import pytest

from annofuse import (
    AnnotatedBox,
    Annotator,
    Box,
    Category,
    DatasetFile,
    GroundTruthBox,
    SceneRecord,
)

GOLDEN_DIR = Path(__file__).parent / "golden"


def make_annotated(x1, y1, x2, y2, category, annotator, weight=None):
    return AnnotatedBox(
        box=Box(x1, y1, x2, y2), category=category, annotator=annotator, weight=weight
    )


def make_truth(x1, y1, x2, y2, category):
    return GroundTruthBox(box=Box(x1, y1, x2, y2), category=category)


@pytest.fixture
def three_reader_dataset() -> DatasetFile:
    """Two findings seen by all three readers, one seen by a single reader."""
    readers = (
        Annotator("reader_a", 0.8),
        Annotator("reader_b", 0.8),
        Annotator("reader_c", 0.8),
    )
    boxes = [
        make_annotated(20, 20, 60, 60, "opacity", "reader_a"),
        make_annotated(22, 21, 61, 62, "opacity", "reader_b"),
        make_annotated(19, 18, 59, 58, "opacity", "reader_c"),
        make_annotated(100, 100, 150, 140, "nodule", "reader_a"),
        make_annotated(101, 99, 149, 142, "nodule", "reader_b"),
        make_annotated(102, 101, 151, 141, "nodule", "reader_c"),
        make_annotated(180, 30, 220, 80, "effusion", "reader_b"),
    ]
    scene = SceneRecord(
        image_id="study_0001", width=256, height=256, kind="multi_annotator",
        boxes=tuple(boxes),
    )
    return DatasetFile(
        kind="multi_annotator",
        categories=(
            Category("effusion", "pleural effusion"),
            Category("nodule", "nodule or mass"),
            Category("opacity", "lung opacity"),
        ),
        scenes=(scene,),
        annotators=readers,
    )
