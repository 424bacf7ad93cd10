"""Command-line pipeline: simulate, fuse, eval, loss-weights, render.

Exit codes: 0 success, 1 I/O failure, 2 validation or usage error.
Logs go to stderr; data only ever goes to files.
"""

from __future__ import annotations

import functools
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .canonical import canonical_dumps
from .dataset_io import (
    Category,
    DatasetError,
    DatasetFile,
    parse,
    write,
    write_weights,
)
from .fusion import CONFIDENCE_MODES, FusionConfig, fuse_scenes
from .loss import export_weights
from .metrics import evaluate, threshold_range
from .records import Annotator, SceneRecord, as_predictions
from .render import render_scene
from .simulation import SimConfig, generate_dataset

logger = logging.getLogger("annofuse")


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DatasetError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="annofuse")
@click.option("-v", "--verbose", count=True, help="Increase stderr log verbosity.")
def main(verbose: int) -> None:
    """Fuse multi-annotator box labels, simulate experts, and evaluate quality."""
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--output-dir", type=click.Path(path_type=Path), required=True,
              help="Directory for the generated dataset files.")
@click.option("--scenes", type=int, default=100, show_default=True, help="Number of scenes.")
@click.option("--experts", type=int, default=3, show_default=True, help="Experts per scene.")
@click.option("--proficiency", type=float, default=0.8, show_default=True,
              help="Expert proficiency in (0, 1).")
@click.option("--diag-stddev", type=float, default=0.05, show_default=True,
              help="Std dev of the transition-matrix diagonal draw.")
@click.option("--jitter-iou-floor", type=float, default=None,
              help="IoU floor for box jitter; defaults to the proficiency.")
@click.option("--categories", type=int, default=10, show_default=True, help="Category count.")
@click.option("--canvas-width", type=float, default=256.0, show_default=True, help="Canvas width.")
@click.option("--canvas-height", type=float, default=256.0, show_default=True, help="Canvas height.")
@click.option("--min-objects", type=int, default=1, show_default=True, help="Min objects per scene.")
@click.option("--max-objects", type=int, default=5, show_default=True, help="Max objects per scene.")
@click.option("--min-size", type=float, default=20.0, show_default=True, help="Min object side.")
@click.option("--max-size", type=float, default=60.0, show_default=True, help="Max object side.")
@click.option("--seed", type=int, default=0, show_default=True, help="RNG seed.")
@_handle_errors
def simulate(output_dir: Path, scenes: int, experts: int, proficiency: float,
             diag_stddev: float, jitter_iou_floor: float | None, categories: int,
             canvas_width: float, canvas_height: float, min_objects: int,
             max_objects: int, min_size: float, max_size: float, seed: int) -> None:
    """Generate ground truth plus per-expert annotation files."""
    config = SimConfig(
        num_scenes=scenes,
        num_experts=experts,
        proficiency=proficiency,
        diag_stddev=diag_stddev,
        jitter_iou_floor=jitter_iou_floor,
        num_categories=categories,
        canvas_width=canvas_width,
        canvas_height=canvas_height,
        objects_per_scene=(min_objects, max_objects),
        object_size_range=(min_size, max_size),
        seed=seed,
    )
    dataset = generate_dataset(config)
    category_table = tuple(Category(id=c, name=c) for c in dataset.categories)
    output_dir.mkdir(parents=True, exist_ok=True)

    truth = DatasetFile(kind="ground_truth", categories=category_table,
                        scenes=dataset.ground_truth)
    write(truth, output_dir / "ground_truth.json")

    combined = DatasetFile(kind="multi_annotator", categories=category_table,
                           scenes=dataset.combined_scenes(), annotators=dataset.annotators)
    write(combined, output_dir / "annotations.json")

    for annotator in dataset.annotators:
        single = DatasetFile(
            kind="multi_annotator",
            categories=category_table,
            scenes=dataset.expert_scenes[annotator.id],
            annotators=(annotator,),
        )
        write(single, output_dir / f"expert_{annotator.id}.json")

    matrices_obj = {
        "format_version": 1,
        "kind": "transition_matrices",
        "categories": list(dataset.categories),
        "outcomes": list(dataset.matrices[0].outcome_labels),
        "experts": [
            {"id": m.expert_id, "matrix": [list(map(float, row)) for row in m.entries]}
            for m in dataset.matrices
        ],
    }
    (output_dir / "transition_matrices.json").write_text(
        canonical_dumps(matrices_obj), encoding="utf-8"
    )
    logger.info("wrote %d scenes for %d experts to %s", scenes, experts, output_dir)


@main.command()
@click.option("--input", "inputs", type=click.Path(path_type=Path), multiple=True,
              required=True, help="Multi-annotator file; repeat to merge several.")
@click.option("--output", type=click.Path(path_type=Path), required=True,
              help="Destination for the fused dataset.")
@click.option("--iou-thresh", type=float, default=0.4, show_default=True,
              help="Strict IoU threshold for clustering.")
@click.option("--confidence-mode", type=click.Choice(CONFIDENCE_MODES),
              default="normalized_agreement", show_default=True,
              help="Agreement-confidence formula.")
@click.option("--num-annotators", type=int, default=None,
              help="Declared annotator count N; defaults to the annotator table size.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker threads for per-image fusion (output-invariant).")
@_handle_errors
def fuse(inputs: tuple[Path, ...], output: Path, iou_thresh: float,
         confidence_mode: str, num_annotators: int | None, workers: int) -> None:
    """Fuse multi-annotator boxes into consensus boxes with confidences."""
    dataset = _merge_inputs([parse(p, expected_kind="multi_annotator") for p in inputs])
    if num_annotators is not None:
        n = num_annotators
    else:
        n = max(len(dataset.annotators or ()), 1)
    config = FusionConfig(num_annotators=n, match_iou_threshold=iou_thresh,
                          confidence_mode=confidence_mode)
    assert dataset.annotators is not None
    fused = fuse_scenes(dataset.scenes, dataset.annotators, config, workers=workers)
    write(
        DatasetFile(kind="fused", categories=dataset.categories,
                    scenes=tuple(fused), annotators=dataset.annotators),
        output,
    )
    logger.info("fused %d scenes into %s", len(fused), output)


@main.command(name="eval")
@click.option("--predictions", "predictions_path", type=click.Path(path_type=Path),
              required=True, help="Predictions, fused, or multi-annotator file to score.")
@click.option("--truth", "truth_path", type=click.Path(path_type=Path), required=True,
              help="Ground-truth (or consensus fused) file.")
@click.option("--thresholds", default="0.4", show_default=True,
              help="IoU thresholds: a value, comma list, or start:stop:step range.")
@click.option("--output", type=click.Path(path_type=Path), required=True,
              help="Destination for the JSON report.")
@_handle_errors
def eval_cmd(predictions_path: Path, truth_path: Path, thresholds: str, output: Path) -> None:
    """Evaluate mAP of a prediction set against reference labels."""
    truth = parse(truth_path)
    if truth.kind not in ("ground_truth", "fused"):
        raise ValueError(f"truth file must be ground_truth or fused, got kind {truth.kind!r}")
    preds = parse(predictions_path)
    if preds.kind == "ground_truth":
        raise ValueError("predictions file may not be a ground_truth file")
    truth_ids = {c.id for c in truth.categories}
    pred_ids = {c.id for c in preds.categories}
    if not pred_ids <= truth_ids:
        raise ValueError(
            f"category tables mismatch: predictions declare {sorted(pred_ids - truth_ids)} "
            "unknown to the truth file"
        )
    report = evaluate(
        [as_predictions(s) for s in preds.scenes],
        truth.scenes,
        _parse_thresholds(thresholds),
        categories=sorted(truth_ids),
    )
    output.write_text(canonical_dumps(report.to_obj()), encoding="utf-8")
    for entry in report.per_threshold:
        logger.info("mAP@%g = %.6f", entry.iou_threshold, entry.mean_ap)
    logger.info("aggregate mAP = %.6f -> %s", report.mean_ap_over_thresholds, output)


@main.command(name="loss-weights")
@click.option("--input", "input_path", type=click.Path(path_type=Path), required=True,
              help="Fused dataset file.")
@click.option("--output", type=click.Path(path_type=Path), required=True,
              help="Destination for the per-box weight export.")
@_handle_errors
def loss_weights(input_path: Path, output: Path) -> None:
    """Export each fused box's agreement confidence as a training weight."""
    dataset = parse(input_path, expected_kind="fused")
    write_weights(export_weights(dataset.scenes), output)
    logger.info("wrote weights for %d scenes to %s", len(dataset.scenes), output)


@main.command()
@click.option("--input", "input_path", type=click.Path(path_type=Path), required=True,
              help="Any dataset file.")
@click.option("--image-id", required=True, help="Image to render.")
@click.option("--output", type=click.Path(path_type=Path), required=True,
              help="Destination SVG file.")
@_handle_errors
def render(input_path: Path, image_id: str, output: Path) -> None:
    """Render one image's boxes as an SVG overlay with a legend."""
    dataset = parse(input_path)
    output.write_text(render_scene(dataset, image_id), encoding="utf-8")
    logger.info("rendered %s to %s", image_id, output)


def _parse_thresholds(spec: str) -> tuple[float, ...]:
    spec = spec.strip()
    if ":" in spec:
        fields = spec.split(":")
        if len(fields) != 3:
            raise ValueError(f"threshold range must be start:stop:step, got {spec!r}")
        start, stop, step = (float(f) for f in fields)
        return threshold_range(start, stop, step)
    values = tuple(float(f) for f in spec.split(",") if f.strip())
    if not values:
        raise ValueError(f"no thresholds in {spec!r}")
    for v in values:
        if not 0.0 < v <= 1.0:
            raise ValueError(f"thresholds must be in (0, 1], got {v}")
    return values


def _merge_inputs(datasets: list[DatasetFile]) -> DatasetFile:
    if len(datasets) == 1:
        return datasets[0]
    categories: dict[str, str] = {}
    annotators: dict[str, Annotator] = {}
    sizes: dict[str, tuple[float, float]] = {}
    boxes: dict[str, list] = {}
    for dataset in datasets:
        for cat in dataset.categories:
            if categories.setdefault(cat.id, cat.name) != cat.name:
                raise ValueError(f"conflicting names for category {cat.id!r} across inputs")
        for person in dataset.annotators or ():
            existing = annotators.setdefault(person.id, person)
            if existing.proficiency != person.proficiency:
                raise ValueError(f"conflicting proficiencies for annotator {person.id!r} across inputs")
        for scene in dataset.scenes:
            size = (scene.width, scene.height)
            if sizes.setdefault(scene.image_id, size) != size:
                raise ValueError(f"conflicting canvas sizes for image {scene.image_id!r} across inputs")
            boxes.setdefault(scene.image_id, []).extend(scene.boxes)
    scenes = tuple(
        SceneRecord(image_id=image_id, width=sizes[image_id][0], height=sizes[image_id][1],
                    kind="multi_annotator", boxes=tuple(entries))
        for image_id, entries in boxes.items()
    )
    return DatasetFile(
        kind="multi_annotator",
        categories=tuple(Category(id=i, name=n) for i, n in categories.items()),
        scenes=scenes,
        annotators=tuple(annotators.values()),
    )


if __name__ == "__main__":
    main()
