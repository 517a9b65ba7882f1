import json

import pytest

from mcdrop.cli import main
from mcdrop.data import generate_synthetic, save_csv


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def data_csv(tmp_path):
    ds = generate_synthetic(160, 2, bayes_error=0.1, seed=4)
    return save_csv(tmp_path / "data.csv", ds)


@pytest.fixture()
def checkpoint(tmp_path, data_csv):
    ckpt = tmp_path / "model.json"
    report = tmp_path / "train.json"
    code = run(["train", "--data", data_csv, "--hidden", "8",
                "--alpha", "0.3", "--beta", "0.2", "--lr", "0.05",
                "--epochs", "8", "--seed", "3",
                "--checkpoint", ckpt, "--report", report])
    assert code == 0
    return ckpt


class TestTrainCommand:
    def test_writes_report_and_checkpoint(self, tmp_path, data_csv):
        ckpt = tmp_path / "m.json"
        report = tmp_path / "r.json"
        assert run(["train", "--data", data_csv, "--epochs", "3",
                    "--lr", "0.05", "--checkpoint", ckpt,
                    "--report", report]) == 0
        doc = json.loads(report.read_text())
        assert doc["schema_version"] == 1
        assert doc["command"] == "train"
        assert len(doc["trace"]) == 3
        assert ckpt.exists()

    def test_same_seed_gives_byte_identical_outputs(self, tmp_path, data_csv):
        outs = []
        for tag in ("a", "b"):
            d = tmp_path / tag
            d.mkdir()
            ckpt = d / "ckpt.json"
            report = d / "report.json"
            assert run(["train", "--data", data_csv, "--epochs", "4",
                        "--lr", "0.05", "--seed", "7",
                        "--checkpoint", ckpt, "--report", report]) == 0
            outs.append((ckpt.read_bytes(), report.read_bytes()))
        assert outs[0][0] == outs[1][0]
        assert outs[0][1] == outs[1][1]

    def test_missing_data_is_a_runtime_error(self, tmp_path, capsys):
        code = run(["train", "--report", tmp_path / "r.json",
                    "--checkpoint", tmp_path / "c.json"])
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert "error" in err


class TestMcPredictCommand:
    def test_posterior_dump_and_report(self, tmp_path, data_csv, checkpoint):
        posteriors = tmp_path / "post.jsonl"
        report = tmp_path / "mc.json"
        assert run(["mc-predict", "--data", data_csv,
                    "--checkpoint", checkpoint, "--T", "20", "--seed", "1",
                    "--posteriors", posteriors, "--report", report]) == 0
        lines = posteriors.read_text().splitlines()
        assert len(lines) == 160
        first = json.loads(lines[0])
        assert set(first) >= {"sample_id", "T", "mu", "sigma",
                              "predicted_class", "scalar_uncertainty"}
        assert "samples" not in first

    def test_full_flag_includes_samples(self, tmp_path, data_csv, checkpoint):
        posteriors = tmp_path / "post_full.jsonl"
        assert run(["mc-predict", "--data", data_csv,
                    "--checkpoint", checkpoint, "--T", "5",
                    "--posteriors", posteriors,
                    "--report", tmp_path / "r.json", "--full"]) == 0
        first = json.loads(posteriors.read_text().splitlines()[0])
        assert len(first["samples"]) == 5

    def test_determinism(self, tmp_path, data_csv, checkpoint):
        reports = []
        for tag in ("a", "b"):
            d = tmp_path / tag
            d.mkdir()
            report = d / "mc.json"
            posteriors = d / "post.jsonl"
            assert run(["mc-predict", "--data", data_csv,
                        "--checkpoint", checkpoint, "--T", "10",
                        "--seed", "5", "--posteriors", posteriors,
                        "--report", report]) == 0
            reports.append(report.read_bytes() + posteriors.read_bytes())
        assert reports[0] == reports[1]


class TestSweepAndCurve:
    def test_sweep_threshold_rows(self, tmp_path, data_csv, checkpoint):
        report = tmp_path / "sweep.json"
        assert run(["sweep-threshold", "--data", data_csv,
                    "--checkpoint", checkpoint, "--T", "20",
                    "--taus", "0.08,0.1,0.2,0.3",
                    "--sigma-formula", "sample_std",
                    "--report", report]) == 0
        rows = json.loads(report.read_text())["rows"]
        assert [r["tau"] for r in rows] == [0.08, 0.1, 0.2, 0.3]
        rejected = [r["rejected"] for r in rows]
        assert rejected == sorted(rejected, reverse=True)
        for r in rows:
            assert r["rejected"] + r["retained"] == 160

    def test_referral_curve_with_csv(self, tmp_path, data_csv, checkpoint):
        report = tmp_path / "curve.json"
        csv_path = tmp_path / "curve.csv"
        assert run(["referral-curve", "--data", data_csv,
                    "--checkpoint", checkpoint, "--T", "10",
                    "--fractions", "0,0.2,0.5", "--seeds", "0,1",
                    "--csv", csv_path, "--report", report]) == 0
        doc = json.loads(report.read_text())
        assert len(doc["per_fraction"]) == 6  # 3 fractions x 2 modes
        assert csv_path.exists()


class TestGridDropoutCommand:
    def test_grid_report(self, tmp_path, data_csv):
        report = tmp_path / "grid.json"
        assert run(["grid-dropout", "--data", data_csv, "--epochs", "4",
                    "--lr", "0.05", "--alphas", "0.0,0.3",
                    "--betas", "0.0", "--folds", "2",
                    "--report", report]) == 0
        grid = json.loads(report.read_text())["grid"]
        assert len(grid["accuracy"]) == 2
        assert grid["best_alpha"] in (0.0, 0.3)


class TestActiveLearnCommand:
    def args(self, tmp_path, data_csv, seed=9):
        return ["active-learn", "--data", data_csv, "--oracle", "simulated",
                "--epochs", "6", "--lr", "0.05", "--batch-size", "16",
                "--T", "8", "--kappa", "30", "--target", "0.8",
                "--patience", "1", "--initial-frac", "0.1",
                "--seed", str(seed),
                "--manifest", tmp_path / "manifest.json",
                "--checkpoint", tmp_path / "ckpt.json",
                "--report", tmp_path / "al.json"]

    def test_run_writes_manifest_and_report(self, tmp_path, data_csv):
        assert run(self.args(tmp_path, data_csv)) == 0
        doc = json.loads((tmp_path / "al.json").read_text())
        assert doc["stop_reason"] in ("target_met", "pool_exhausted",
                                      "stalled")
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["schema_version"] == 1
        assert manifest["history"] == doc["history"]

    def test_byte_identical_reports_across_runs(self, tmp_path, data_csv):
        blobs = []
        for sub in ("x", "y"):
            d = tmp_path / sub
            d.mkdir()
            argv = self.args(d, data_csv)
            assert run(argv) == 0
            blobs.append((d / "al.json").read_bytes())
        assert blobs[0] == blobs[1]


class TestExportReport:
    def test_merge_is_idempotent(self, tmp_path, data_csv):
        ckpt = tmp_path / "c.json"
        r1 = tmp_path / "train.json"
        assert run(["train", "--data", data_csv, "--epochs", "2",
                    "--lr", "0.05", "--checkpoint", ckpt,
                    "--report", r1]) == 0
        merged1 = tmp_path / "merged1.json"
        merged2 = tmp_path / "merged2.json"
        assert run(["export-report", "--inputs", r1, "--out", merged1]) == 0
        assert run(["export-report", "--inputs", r1, "--out", merged2]) == 0
        assert merged1.read_bytes() == merged2.read_bytes()
        doc = json.loads(merged1.read_text())
        assert "train.json" in doc["reports"]


class TestUsageErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["no-such-command"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["mc-predict"])  # checkpoint required
        assert exc.value.code == 2

    def test_config_file_provides_defaults(self, tmp_path, data_csv):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"epochs": 2, "lr": 0.05,
                                   "report": str(tmp_path / "r.json"),
                                   "checkpoint": str(tmp_path / "c.json")}))
        assert run(["train", "--data", data_csv, "--config", cfg]) == 0
        doc = json.loads((tmp_path / "r.json").read_text())
        assert len(doc["trace"]) == 2
