"""Acceptance suite: one test per release criterion.

Run under pytest (use -s to see the per-criterion PASS lines) or
standalone:  python3 tests/test_acceptance.py
"""

import functools
import sys
import time
import warnings

import numpy as np

from annofuse import (
    AnnotatedBox,
    Annotator,
    Box,
    Category,
    DatasetFile,
    DatasetParseError,
    DatasetValidationError,
    DataWarning,
    FusionConfig,
    LossInputs,
    SimConfig,
    as_predictions,
    base_loss,
    cross_entropy,
    dumps,
    earl_loss,
    evaluate,
    fuse_image,
    fuse_scenes,
    generate_dataset,
    iou,
    loads,
    objectness_indicator,
    parse,
    read_weights,
    threshold_range,
    weights_dumps,
)
from conftest import GOLDEN_DIR
from reference_eval import evaluate_naive
from test_geometry import grid_iou
from test_metrics import compare_reports, random_instance, to_plain

_CRITERIA = []


def criterion(num, name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"[criterion {num}] {name}: FAIL", file=sys.stderr, flush=True)
                raise
            print(f"[criterion {num}] {name}: PASS", file=sys.stderr, flush=True)

        _CRITERIA.append(wrapper)
        return wrapper

    return deco


def elapsed_under(t0, bound, label):
    took = time.perf_counter() - t0
    assert took < bound, f"{label} took {took:.2f}s, budget {bound}s"


@criterion(1, "geometry IoU matches the grid-counting oracle")
def test_criterion_1_geometry_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    for _ in range(1000):
        x1, y1 = rng.integers(0, 64, 2)
        a = Box(x1, y1, rng.integers(x1, 65), rng.integers(y1, 65))
        x1, y1 = rng.integers(0, 64, 2)
        b = Box(x1, y1, rng.integers(x1, 65), rng.integers(y1, 65))
        value = iou(a, b)
        assert value == grid_iou(a, b)
        assert value == iou(b, a)
        if (a.x2 - a.x1) * (a.y2 - a.y1) > 0:
            assert iou(a, a) == 1.0
    elapsed_under(t0, 1.0, "geometry oracle")


@criterion(2, "fusion recovers separated clusters with exact weights")
def test_criterion_2_fusion_correctness():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    for _ in range(200):
        annotators = [Annotator(f"a{i}", float(rng.uniform(0.3, 1.0))) for i in range(5)]
        prof = {a.id: a.proficiency for a in annotators}
        k = int(rng.integers(1, 5))
        expected = []
        annotations = []
        for g in range(k):
            size = int(rng.integers(1, 5))
            w0, h0 = rng.uniform(40, 80, 2)
            bx, by = 200.0 * g, 150.0 * g
            category = str(rng.integers(0, 3))
            member_boxes, member_weights = [], []
            for _m in range(size):
                d = rng.uniform(-0.02, 0.02, 4)
                box = Box(bx + d[0] * w0, by + d[1] * h0, bx + w0 + d[2] * w0, by + h0 + d[3] * h0)
                who = annotators[int(rng.integers(0, 5))].id
                annotations.append(AnnotatedBox(box=box, category=category, annotator=who))
                member_boxes.append(box.as_tuple())
                member_weights.append(prof[who])
            coords = np.array(member_boxes)
            weights = np.array(member_weights)
            mean = (weights[:, None] * coords).sum(axis=0) / weights.sum()
            conf = weights.mean() * min(size, 5) / 5
            expected.append((size, mean, conf))
        fused = fuse_image(annotations, annotators, FusionConfig(num_annotators=5))
        assert len(fused) == k
        used = set()
        for size, mean, conf in expected:
            best = min(
                (f for i, f in enumerate(fused) if i not in used),
                key=lambda f: abs(f.box.x1 - mean[0]),
            )
            used.add(fused.index(best))
            assert best.cluster_size == size
            assert np.allclose(best.box.as_tuple(), mean, atol=1e-9, rtol=0)
            assert abs(best.confidence - conf) <= 1e-12
    elapsed_under(t0, 1.0, "fusion correctness")


@criterion(3, "fusion output is byte-identical across runs and worker counts")
def test_criterion_3_fusion_determinism():
    dataset = generate_dataset(SimConfig(num_scenes=1000, seed=42))
    scenes = dataset.combined_scenes()
    categories = tuple(Category(c, c) for c in dataset.categories)
    config = FusionConfig(num_annotators=3)

    def run(workers):
        fused = fuse_scenes(scenes, dataset.annotators, config, workers=workers)
        return dumps(
            DatasetFile(kind="fused", categories=categories,
                        scenes=tuple(fused), annotators=dataset.annotators)
        ).encode("utf-8")

    outputs = [run(1) for _ in range(5)]
    outputs.append(run(8))
    assert all(out == outputs[0] for out in outputs[1:])


@criterion(4, "evaluate equals the brute-force mAP oracle to 1e-12")
def test_criterion_4_map_oracle_equivalence():
    rng = np.random.default_rng(404)
    thresholds = [0.4, *threshold_range()]
    t0 = time.perf_counter()
    for _ in range(100):
        preds, truths = random_instance(rng, images=int(rng.integers(1, 21)))
        report = evaluate(preds, truths, thresholds, categories=["c0", "c1", "c2", "c3"])
        reference = evaluate_naive(*to_plain(preds, truths), thresholds)
        compare_reports(report, reference, tol=1e-12)
    elapsed_under(t0, 5.0, "mAP oracle equivalence")


@criterion(5, "re-weighted loss algebra is exact")
def test_criterion_5_loss_algebra():
    rng = np.random.default_rng(505)
    for _ in range(1000):
        k = int(rng.integers(2, 7))
        probs = tuple(rng.dirichlet(np.ones(k)))
        kwargs = dict(
            class_probs=probs,
            true_class=int(rng.integers(0, k)),
            pred_offsets=tuple(rng.normal(0, 2, 4)),
            target_offsets=tuple(rng.normal(0, 2, 4)),
            anchor_gt_iou=float(rng.random()),
            beta=float(rng.uniform(0.1, 3.0)),
            eta=float(rng.uniform(0.05, 0.95)),
        )
        c = float(rng.uniform(0.01, 1.0))
        assert abs(earl_loss(LossInputs(confidence=c, **kwargs))
                   - c * base_loss(LossInputs(**kwargs))) <= 1e-12
        assert earl_loss(LossInputs(confidence=1.0, **kwargs)) == base_loss(
            LossInputs(**kwargs)
        )
    # Strict objectness: IoU equal to eta stays off.
    for eta in (0.3, 0.5, 0.7):
        assert objectness_indicator(eta, eta) == 0
        assert objectness_indicator(eta + 1e-9, eta) == 1
    # Analytic cross-entropy gradient against central differences.
    for p_true in (0.3, 0.7):
        h = 1e-6
        numeric = (
            cross_entropy((p_true + h, 1 - p_true - h), 0)
            - cross_entropy((p_true - h, 1 - p_true + h), 0)
        ) / (2 * h)
        analytic = -1.0 / p_true
        assert abs(numeric - analytic) / abs(analytic) < 1e-6


@criterion(6, "simulation statistics at the reference settings")
def test_criterion_6_simulation_statistics():
    t0 = time.perf_counter()
    config = SimConfig(num_scenes=3500, num_experts=3, proficiency=0.8,
                       diag_stddev=0.05, seed=606)
    dataset = generate_dataset(config)

    for matrix in dataset.matrices:
        sums = matrix.entries.sum(axis=1)
        assert np.all(np.abs(sums - 1.0) <= 1e-9)
        diag = np.diagonal(matrix.entries)
        assert np.all(diag >= 0.5) and np.all(diag <= 1.0)

    total_objects = sum(len(s.boxes) for s in dataset.ground_truth)
    assert total_objects >= 10_000

    agreements = 0
    outcomes = 0
    for truth_scene in dataset.ground_truth:
        truth_boxes = [(g.box, g.category) for g in truth_scene.boxes]
        outcomes += len(truth_boxes) * config.num_experts
        for expert_id in dataset.expert_scenes:
            scene = dataset.expert_scenes[expert_id][int(truth_scene.image_id.split("_")[1])]
            for ann in scene.boxes:
                source = max(truth_boxes, key=lambda tb: iou(ann.box, tb[0]))
                assert iou(ann.box, source[0]) > 0.8  # the jitter floor, strictly
                if ann.category == source[1]:
                    agreements += 1
    rate = agreements / outcomes
    assert 0.77 <= rate <= 0.83, f"agreement rate {rate:.4f} outside [0.77, 0.83]"
    elapsed_under(t0, 10.0, "simulation statistics")


@criterion(7, "fused labels outscore every individual expert on mAP@0.4")
def test_criterion_7_fusion_beats_individual_experts():
    t0 = time.perf_counter()
    for seed in (1, 2, 3, 4, 5):
        dataset = generate_dataset(SimConfig(num_scenes=1000, num_experts=3,
                                             proficiency=0.8, seed=seed))
        fused = fuse_scenes(dataset.combined_scenes(), dataset.annotators,
                            FusionConfig(num_annotators=3))
        fused_map = evaluate(
            [as_predictions(s) for s in fused], dataset.ground_truth, [0.4],
            categories=dataset.categories,
        ).per_threshold[0].mean_ap
        for expert_id, scenes in dataset.expert_scenes.items():
            expert_map = evaluate(
                [as_predictions(s) for s in scenes], dataset.ground_truth, [0.4],
                categories=dataset.categories,
            ).per_threshold[0].mean_ap
            assert fused_map > expert_map, (
                f"seed {seed}: fused {fused_map:.4f} <= expert {expert_id} {expert_map:.4f}"
            )
    elapsed_under(t0, 30.0, "fusion-beats-experts")


@criterion(8, "golden files are byte-stable and the parser survives fuzzing")
def test_criterion_8_io_robustness():
    for name in ("ground_truth.json", "multi_annotator.json", "fused.json", "predictions.json"):
        text = (GOLDEN_DIR / name).read_text(encoding="utf-8")
        assert dumps(parse(GOLDEN_DIR / name)) == text
    weights_text = (GOLDEN_DIR / "loss_weights.json").read_text(encoding="utf-8")
    assert weights_dumps(read_weights(GOLDEN_DIR / "loss_weights.json")) == weights_text

    base = (GOLDEN_DIR / "multi_annotator.json").read_bytes()
    rng = np.random.default_rng(808)
    for _ in range(10_000):
        data = bytearray(base)
        for _ in range(int(rng.integers(1, 9))):
            op = int(rng.integers(0, 3))
            pos = int(rng.integers(0, len(data)))
            if op == 0:
                data[pos] = int(rng.integers(0, 256))
            elif op == 1:
                del data[pos]
            else:
                data.insert(pos, int(rng.integers(0, 256)))
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DataWarning)
                loads(bytes(data))
        except (DatasetParseError, DatasetValidationError):
            pass
        # Anything else propagates and fails the criterion.


if __name__ == "__main__":
    failures = 0
    for check in _CRITERIA:
        try:
            check()
        except BaseException as exc:  # noqa: BLE001 - standalone reporting
            failures += 1
            print(f"  {type(exc).__name__}: {exc}", file=sys.stderr)
    sys.exit(1 if failures else 0)
