import json
import warnings

import pytest
from click.testing import CliRunner

from annofuse import parse, read_weights
from annofuse.cli import main
from conftest import GOLDEN_DIR


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args], prog_name="annofuse")


def simulate_args(outdir, scenes=20, seed=7, **extra):
    args = [
        "simulate", "--output-dir", outdir, "--scenes", scenes, "--seed", seed,
    ]
    for key, value in extra.items():
        args += [f"--{key.replace('_', '-')}", value]
    return args


class TestSimulateCommand:
    def test_writes_expected_files(self, runner, tmp_path):
        result = invoke(runner, *simulate_args(tmp_path / "out"))
        assert result.exit_code == 0, result.output
        names = sorted(p.name for p in (tmp_path / "out").iterdir())
        assert names == [
            "annotations.json",
            "expert_E1.json",
            "expert_E2.json",
            "expert_E3.json",
            "ground_truth.json",
            "transition_matrices.json",
        ]

    def test_outputs_reparse_without_warnings(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "out"))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            parse(tmp_path / "out" / "ground_truth.json", expected_kind="ground_truth")
            parse(tmp_path / "out" / "annotations.json", expected_kind="multi_annotator")
            parse(tmp_path / "out" / "expert_E1.json", expected_kind="multi_annotator")
        matrices = json.loads((tmp_path / "out" / "transition_matrices.json").read_text())
        assert matrices["kind"] == "transition_matrices"
        assert matrices["outcomes"][-1] == "no_obj"
        assert len(matrices["experts"]) == 3

    def test_same_seed_gives_identical_bytes(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "a"))
        invoke(runner, *simulate_args(tmp_path / "b"))
        for name in ("ground_truth.json", "annotations.json", "transition_matrices.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_out_of_range_proficiency_exits_2(self, runner, tmp_path):
        result = invoke(runner, *simulate_args(tmp_path / "out", proficiency=1.5))
        assert result.exit_code == 2
        assert "proficiency" in result.output


class TestFuseCommand:
    def test_fuses_simulated_output(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "sim"))
        fused_path = tmp_path / "fused.json"
        result = invoke(
            runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
            "--output", fused_path,
        )
        assert result.exit_code == 0, result.output
        fused = parse(fused_path, expected_kind="fused")
        assert len(fused.scenes) == 20

    def test_merging_expert_files_equals_combined_file(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "sim"))
        combined, merged = tmp_path / "combined.json", tmp_path / "merged.json"
        invoke(runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
               "--output", combined)
        result = invoke(
            runner, "fuse",
            "--input", tmp_path / "sim" / "expert_E1.json",
            "--input", tmp_path / "sim" / "expert_E2.json",
            "--input", tmp_path / "sim" / "expert_E3.json",
            "--output", merged,
        )
        assert result.exit_code == 0, result.output
        assert merged.read_bytes() == combined.read_bytes()

    def test_fuse_empty_dataset(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "sim", scenes=0))
        result = invoke(
            runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
            "--output", tmp_path / "fused.json",
        )
        assert result.exit_code == 0, result.output
        assert parse(tmp_path / "fused.json").scenes == ()

    def test_unknown_annotator_in_file_exits_2(self, runner, tmp_path):
        bad = json.loads((GOLDEN_DIR / "multi_annotator.json").read_text())
        bad["annotations"][0]["annotator_id"] = "ghost"
        bad_path = tmp_path / "bad.json"
        bad_path.write_text(json.dumps(bad))
        result = invoke(runner, "fuse", "--input", bad_path, "--output", tmp_path / "f.json")
        assert result.exit_code == 2
        assert "ghost" in result.output

    def test_missing_input_exits_1(self, runner, tmp_path):
        result = invoke(
            runner, "fuse", "--input", tmp_path / "nope.json",
            "--output", tmp_path / "f.json",
        )
        assert result.exit_code == 1

    def test_worker_count_does_not_change_bytes(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "sim"))
        serial, threaded = tmp_path / "serial.json", tmp_path / "threaded.json"
        invoke(runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
               "--output", serial, "--workers", 1)
        invoke(runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
               "--output", threaded, "--workers", 8)
        assert serial.read_bytes() == threaded.read_bytes()


class TestEvalCommand:
    def test_fused_against_truth_report(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "sim"))
        invoke(runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
               "--output", tmp_path / "fused.json")
        report_path = tmp_path / "report.json"
        result = invoke(
            runner, "eval",
            "--predictions", tmp_path / "fused.json",
            "--truth", tmp_path / "sim" / "ground_truth.json",
            "--thresholds", "0.4",
            "--output", report_path,
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["kind"] == "eval_report"
        assert report["thresholds"] == [0.4]
        assert 0.0 <= report["per_threshold"][0]["mean_ap"] <= 1.0

    def test_threshold_range_syntax(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "sim", scenes=5))
        invoke(runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
               "--output", tmp_path / "fused.json")
        report_path = tmp_path / "report.json"
        result = invoke(
            runner, "eval",
            "--predictions", tmp_path / "fused.json",
            "--truth", tmp_path / "sim" / "ground_truth.json",
            "--thresholds", "0.5:0.95:0.05",
            "--output", report_path,
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert len(report["per_threshold"]) == 10

    def test_single_expert_file_evaluates_like_a_reader_row(self, runner, tmp_path):
        invoke(runner, *simulate_args(tmp_path / "sim"))
        report_path = tmp_path / "expert.json"
        result = invoke(
            runner, "eval",
            "--predictions", tmp_path / "sim" / "expert_E1.json",
            "--truth", tmp_path / "sim" / "ground_truth.json",
            "--thresholds", "0.4",
            "--output", report_path,
        )
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert 0.0 <= report["per_threshold"][0]["mean_ap"] <= 1.0

    def test_mismatched_category_tables_exit_2(self, runner, tmp_path):
        preds = json.loads((GOLDEN_DIR / "predictions.json").read_text())
        preds["categories"].append({"id": "extra", "name": "extra"})
        pred_path = tmp_path / "preds.json"
        pred_path.write_text(json.dumps(preds))
        result = invoke(
            runner, "eval",
            "--predictions", pred_path,
            "--truth", GOLDEN_DIR / "ground_truth.json",
            "--output", tmp_path / "r.json",
        )
        assert result.exit_code == 2
        assert "categories" in result.output or "category" in result.output

    def test_perfect_predictions_score_one(self, runner, tmp_path):
        # Noiseless simulation: fused output equals ground truth.
        invoke(runner, *simulate_args(tmp_path / "sim", scenes=5,
                                      proficiency=0.999, jitter_iou_floor=1.0))
        invoke(runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
               "--output", tmp_path / "fused.json")
        report_path = tmp_path / "report.json"
        invoke(
            runner, "eval",
            "--predictions", tmp_path / "fused.json",
            "--truth", tmp_path / "sim" / "ground_truth.json",
            "--thresholds", "0.4",
            "--output", report_path,
        )
        report = json.loads(report_path.read_text())
        assert report["per_threshold"][0]["mean_ap"] == 1.0


class TestLossWeightsCommand:
    def test_exports_weights(self, runner, tmp_path):
        weights_path = tmp_path / "weights.json"
        result = invoke(
            runner, "loss-weights",
            "--input", GOLDEN_DIR / "fused.json",
            "--output", weights_path,
        )
        assert result.exit_code == 0, result.output
        export = read_weights(weights_path)
        fused = parse(GOLDEN_DIR / "fused.json")
        assert len(export.entries) == sum(len(s.boxes) for s in fused.scenes)

    def test_rejects_non_fused_input(self, runner, tmp_path):
        result = invoke(
            runner, "loss-weights",
            "--input", GOLDEN_DIR / "ground_truth.json",
            "--output", tmp_path / "w.json",
        )
        assert result.exit_code == 2


class TestRenderCommand:
    def test_renders_svg(self, runner, tmp_path):
        out = tmp_path / "scene.svg"
        result = invoke(
            runner, "render",
            "--input", GOLDEN_DIR / "multi_annotator.json",
            "--image-id", "study_0001",
            "--output", out,
        )
        assert result.exit_code == 0, result.output
        assert out.read_text().startswith("<svg")

    def test_unknown_image_exits_2(self, runner, tmp_path):
        result = invoke(
            runner, "render",
            "--input", GOLDEN_DIR / "multi_annotator.json",
            "--image-id", "study_9999",
            "--output", tmp_path / "x.svg",
        )
        assert result.exit_code == 2


class TestPipelineComposition:
    def test_simulate_fuse_eval_runs_clean(self, runner, tmp_path):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert invoke(runner, *simulate_args(tmp_path / "sim")).exit_code == 0
            assert invoke(
                runner, "fuse", "--input", tmp_path / "sim" / "annotations.json",
                "--output", tmp_path / "fused.json",
            ).exit_code == 0
            assert invoke(
                runner, "eval",
                "--predictions", tmp_path / "fused.json",
                "--truth", tmp_path / "sim" / "ground_truth.json",
                "--output", tmp_path / "report.json",
            ).exit_code == 0
            assert invoke(
                runner, "loss-weights", "--input", tmp_path / "fused.json",
                "--output", tmp_path / "weights.json",
            ).exit_code == 0
            read_weights(tmp_path / "weights.json")
            parse(tmp_path / "fused.json", expected_kind="fused")


class TestHelpGoldens:
    @pytest.mark.parametrize(
        "name,args",
        [
            ("main", ["--help"]),
            ("simulate", ["simulate", "--help"]),
            ("fuse", ["fuse", "--help"]),
            ("eval", ["eval", "--help"]),
            ("loss-weights", ["loss-weights", "--help"]),
            ("render", ["render", "--help"]),
        ],
    )
    def test_help_matches_golden(self, runner, name, args):
        result = runner.invoke(main, args, prog_name="annofuse")
        assert result.exit_code == 0
        golden = (GOLDEN_DIR / "help" / f"{name}.txt").read_text(encoding="utf-8")
        assert result.output == golden
