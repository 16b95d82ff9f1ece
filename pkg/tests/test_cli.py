"""CLI contract: exit codes, golden CSV outputs, reproducibility."""

from __future__ import annotations

import filecmp
import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from claimguard.cli import main

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="module")
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory, runner) -> Path:
    out = tmp_path_factory.mktemp("cli") / "fixture"
    result = runner.invoke(
        main,
        ["gen-fixtures", "--vehicles", "6", "--seed", "13", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    return out


def digest_tree(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestHelpAndUsage:
    @pytest.mark.parametrize(
        "command",
        ["gen-fixtures", "enroll", "check", "eval-det", "eval-cmc", "ablate", "serve"],
    )
    def test_help_exits_zero(self, runner, command):
        result = runner.invoke(main, [command, "--help"])
        assert result.exit_code == 0
        assert "--help" in result.output

    def test_unknown_flag_is_usage_error(self, runner):
        result = runner.invoke(main, ["gen-fixtures", "--no-such-flag"])
        assert result.exit_code == 2

    def test_missing_file_is_domain_error(self, runner):
        result = runner.invoke(
            main,
            [
                "eval-det",
                "--annotations",
                "/nonexistent/ann.txt",
                "--detections",
                "/nonexistent/det.txt",
            ],
        )
        assert result.exit_code == 1
        assert "/nonexistent/ann.txt" in result.output


class TestGenFixtures:
    def test_reproducible_trees(self, runner, tmp_path):
        args = ["gen-fixtures", "--vehicles", "4", "--seed", "3"]
        assert runner.invoke(main, args + ["--out", str(tmp_path / "a")]).exit_code == 0
        assert runner.invoke(main, args + ["--out", str(tmp_path / "b")]).exit_code == 0
        assert digest_tree(tmp_path / "a") == digest_tree(tmp_path / "b")

    def test_stdout_is_json_with_calibration(self, runner, tmp_path):
        result = runner.invoke(
            main, ["gen-fixtures", "--vehicles", "4", "--seed", "3", "--out", str(tmp_path / "f")]
        )
        payload = json.loads(result.stdout.strip().splitlines()[-1])
        assert "threshold" in payload["calibration"]


class TestEvalDet:
    def test_matches_golden_table(self, runner, tmp_path):
        out_table = tmp_path / "table.csv"
        out_curve = tmp_path / "curve.csv"
        result = runner.invoke(
            main,
            [
                "eval-det",
                "--annotations", str(DATA / "det_fixture_annotations.txt"),
                "--detections", str(DATA / "det_fixture_detections.txt"),
                "--iou", "0.5",
                "--thresholds", "0.1,0.3,0.5,0.7",
                "--out-table", str(out_table),
                "--out-curve", str(out_curve),
            ],
        )
        assert result.exit_code == 0, result.output
        assert out_table.read_text() == (DATA / "det_fixture_golden_table.csv").read_text()
        assert out_curve.read_text() == (DATA / "det_fixture_golden_curve.csv").read_text()

    def test_stdout_equals_table(self, runner):
        result = runner.invoke(
            main,
            [
                "eval-det",
                "--annotations", str(DATA / "det_fixture_annotations.txt"),
                "--detections", str(DATA / "det_fixture_detections.txt"),
                "--thresholds", "0.1,0.3,0.5,0.7",
            ],
        )
        golden = (DATA / "det_fixture_golden_table.csv").read_text()
        assert result.stdout.strip() == golden.strip()

    def test_byte_stable_across_runs(self, runner, tmp_path):
        for name in ("a", "b"):
            runner.invoke(
                main,
                [
                    "eval-det",
                    "--annotations", str(DATA / "det_fixture_annotations.txt"),
                    "--detections", str(DATA / "det_fixture_detections.txt"),
                    "--out-table", str(tmp_path / f"{name}.csv"),
                ],
            )
        assert filecmp.cmp(tmp_path / "a.csv", tmp_path / "b.csv", shallow=False)


class TestEnrollAndCheck:
    def test_enroll_then_duplicate_check_flags(self, runner, fixture_dir, tmp_path):
        store = tmp_path / "store"
        result = runner.invoke(
            main,
            [
                "enroll",
                "--manifest", str(fixture_dir / "manifest.json"),
                "--store", str(store),
            ],
        )
        assert result.exit_code == 0, result.output
        summary = json.loads(result.stdout.strip().splitlines()[-1])
        assert summary["enrolled"] == 6
        assert summary["features"] == 12

        manifest = json.loads((fixture_dir / "manifest.json").read_text())
        threshold = manifest["calibration"]["threshold"]
        pair = manifest["duplicate_pairs"][0]
        region = pair["close_up"]["regions"][0]["bbox"]
        check_result = runner.invoke(
            main,
            [
                "check",
                "--store", str(store),
                "--vehicle-id", pair["vehicle_id"],
                "--body", str(fixture_dir / pair["body"]["path"]),
                "--close-up", str(fixture_dir / pair["close_up"]["path"]),
                "--region", f"{region['cx']},{region['cy']},{region['w']},{region['h']}",
                "--threshold", str(threshold),
            ],
        )
        assert check_result.exit_code == 0, check_result.output
        assessment = json.loads(check_result.stdout.strip().splitlines()[-1])
        assert assessment["flagged"] is True
        assert assessment["best"]["claim_id"] == f"claim-{pair['vehicle_id']}"

    def test_check_against_missing_store_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(
            main,
            [
                "check",
                "--store", str(tmp_path / "nope"),
                "--vehicle-id", "v0",
                "--body", "missing.png",
                "--close-up", "missing.png",
                "--region", "0.5,0.5,0.3,0.3",
            ],
        )
        assert result.exit_code == 1


class TestEvalCmcAndAblate:
    def test_eval_cmc_outputs_csv(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "cmc.csv"
        result = runner.invoke(
            main,
            [
                "eval-cmc",
                "--manifest", str(fixture_dir / "manifest.json"),
                "--seed", "13",
                "--max-rank", "5",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "rank,match_rate"
        assert len(lines) == 6
        rates = [float(line.split(",")[1]) for line in lines[1:]]
        assert rates == sorted(rates)

    def test_ablate_default_battery(self, runner, fixture_dir, tmp_path):
        out = tmp_path / "ablation.csv"
        result = runner.invoke(
            main,
            [
                "ablate",
                "--manifest", str(fixture_dir / "manifest.json"),
                "--seed", "13",
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        rows = out.read_text().strip().splitlines()
        assert rows[0].startswith("label,roi_source")
        assert len(rows) == 7
        by_label = {line.split(",")[0]: line.split(",") for line in rows[1:]}
        rank1 = {label: float(fields[4]) for label, fields in by_label.items()}
        assert rank1["global+local"] > rank1["global-only"]

    def test_ablate_csv_byte_stable(self, runner, fixture_dir, tmp_path):
        for name in ("x", "y"):
            result = runner.invoke(
                main,
                [
                    "ablate",
                    "--manifest", str(fixture_dir / "manifest.json"),
                    "--seed", "13",
                    "--out", str(tmp_path / f"{name}.csv"),
                ],
            )
            assert result.exit_code == 0, result.output
        assert filecmp.cmp(tmp_path / "x.csv", tmp_path / "y.csv", shallow=False)

    def test_missing_detector_file_fails(self, runner, fixture_dir, tmp_path):
        result = runner.invoke(
            main,
            [
                "eval-cmc",
                "--manifest", str(fixture_dir / "manifest.json"),
                "--roi-source", "detector",
            ],
        )
        assert result.exit_code == 1
