"""End-to-end checks of the command-line interface, run in-process."""

import json
import os

import numpy as np
import pytest

from spectral2d import cli
from spectral2d.verify import CheckResult


def run_cli(argv):
    return cli.main(argv)


def read_dir_bytes(path):
    return {name: (path / name).read_bytes() for name in os.listdir(path)}


TRAIN_FAST = [
    "--epochs", "20", "--patience", "8", "--degree", "2",
    "--hidden", "8", "--dropout", "0.0",
]


class TestGen:
    def test_writes_dataset_directory(self, tmp_path):
        out = tmp_path / "ds"
        code = run_cli(["gen", "--gen-kind", "separable", "--nodes", "40", "--out", str(out)])
        assert code == 0
        assert sorted(os.listdir(out)) == [
            "edges.tsv", "features.csv", "labels.csv", "splits.json",
        ]

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            argv = ["gen", "--gen-kind", "cross_channel", "--nodes", "30",
                    "--seed", "5", "--out", str(out)]
            assert run_cli(argv) == 0
        assert read_dir_bytes(a) == read_dir_bytes(b)

    def test_invalid_spec_is_usage_error(self, tmp_path, capsys):
        argv = ["gen", "--gen-kind", "cross_channel", "--classes", "3",
                "--out", str(tmp_path / "x")]
        assert run_cli(argv) == 2
        assert "error:" in capsys.readouterr().err


class TestTrain:
    def test_metrics_and_checkpoint(self, tmp_path):
        ds = tmp_path / "ds"
        run_cli(["gen", "--gen-kind", "separable", "--nodes", "40", "--out", str(ds)])
        out = tmp_path / "run"
        code = run_cli(["train", "--data", str(ds), "--out", str(out)] + TRAIN_FAST)
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert set(metrics) == {
            "schema_version", "train_loss", "valid_acc", "test_acc", "seed", "config",
        }
        assert 0.0 <= metrics["test_acc"] <= 1.0
        assert len(metrics["train_loss"]) == len(metrics["valid_acc"])
        assert metrics["config"]["degree"] == 2
        ckpt = json.loads((out / "checkpoint.json").read_text())
        assert ckpt["dims"]["conv_mode"] == "2d"

    def test_seed_repeat_identical(self, tmp_path):
        ds = tmp_path / "ds"
        run_cli(["gen", "--gen-kind", "separable", "--nodes", "40", "--out", str(ds)])
        runs = []
        for tag in ("r1", "r2"):
            out = tmp_path / tag
            assert run_cli(
                ["train", "--data", str(ds), "--seed", "3", "--out", str(out)] + TRAIN_FAST
            ) == 0
            runs.append(read_dir_bytes(out))
        assert runs[0] == runs[1]

    def test_synthetic_source_inline(self, tmp_path):
        out = tmp_path / "run"
        code = run_cli(
            ["train", "--gen-kind", "separable", "--nodes", "40", "--out", str(out)]
            + TRAIN_FAST
        )
        assert code == 0
        assert (out / "metrics.json").exists()

    def test_missing_source_is_usage_error(self, tmp_path, capsys):
        assert run_cli(["train", "--out", str(tmp_path / "x")] + TRAIN_FAST) == 2
        assert "dataset source" in capsys.readouterr().err

    def test_both_sources_rejected(self, tmp_path, capsys):
        argv = ["train", "--data", "nowhere", "--gen-kind", "separable",
                "--out", str(tmp_path / "x")] + TRAIN_FAST
        assert run_cli(argv) == 2
        assert "mutually exclusive" in capsys.readouterr().err

    def test_missing_dataset_dir_is_io_error(self, tmp_path, capsys):
        argv = ["train", "--data", str(tmp_path / "absent"), "--out", str(tmp_path / "x")]
        assert run_cli(argv + TRAIN_FAST) == 2


class TestVerify:
    def test_all_scopes_pass(self, capsys):
        assert run_cli(["verify", "spectral"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert all(line.startswith("PASS") for line in lines[:-1])
        assert lines[-1].endswith("checks passed")

    def test_failing_check_gives_exit_one(self, monkeypatch, capsys):
        fake = [CheckResult("doomed", False, "synthetic failure")]
        monkeypatch.setattr("spectral2d.verify.run", lambda scope: fake)
        assert run_cli(["verify"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_scope_rejected(self):
        with pytest.raises(SystemExit):
            run_cli(["verify", "bogus"])


class TestLab:
    def test_report_files_and_determinism(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            code = run_cli(["lab", "--out", str(out), "--restarts", "4", "--steps", "300"])
            assert code == 0
            outs.append(read_dir_bytes(out))
        assert outs[0] == outs[1]
        doc = json.loads(outs[0]["report.json"].decode())
        assert all(row["verdict"] == "ok" for row in doc["cases"])
        header = outs[0]["report.csv"].decode().splitlines()[0]
        assert header == "case,paradigm,floor,achieved,residual2d"


class TestEig:
    def test_spectrum_csv(self, tmp_path):
        ds = tmp_path / "ds"
        run_cli(["gen", "--gen-kind", "separable", "--nodes", "24", "--out", str(ds)])
        out = tmp_path / "spec.csv"
        assert run_cli(["eig", "--data", str(ds), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda"
        lam = np.array([float(v) for v in lines[1:]])
        assert lam.size == 24
        assert np.all(np.diff(lam) >= -1e-12)
        assert abs(lam[0]) < 1e-9
        assert lam.max() <= 2.0 + 1e-9

    def test_vectors_flag_adds_columns(self, tmp_path):
        ds = tmp_path / "ds"
        run_cli(["gen", "--gen-kind", "separable", "--nodes", "10", "--out", str(ds)])
        out = tmp_path / "spec.csv"
        assert run_cli(["eig", "--data", str(ds), "--vectors", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].split(",") == ["lambda"] + [f"u{i}" for i in range(10)]
        # each eigenvector row has unit norm
        for line in lines[1:]:
            vals = [float(v) for v in line.split(",")]
            assert abs(sum(v * v for v in vals[1:]) - 1.0) < 1e-8


class TestFilter:
    def test_shared_filter_any_width(self, tmp_path):
        ds = tmp_path / "ds"
        run_cli(["gen", "--gen-kind", "separable", "--nodes", "30", "--out", str(ds)])
        run = tmp_path / "run"
        assert run_cli(
            ["train", "--data", str(ds), "--conv-mode", "p1", "--out", str(run)] + TRAIN_FAST
        ) == 0
        out = tmp_path / "filt.csv"
        code = run_cli(
            ["filter", str(run / "checkpoint.json"), "--data", str(ds), "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(f"f{j}" for j in range(8))
        assert len(lines) == 1 + 30

    def test_channel_mismatch_is_usage_error(self, tmp_path, capsys):
        ds = tmp_path / "ds"
        run_cli(["gen", "--gen-kind", "separable", "--nodes", "30", "--out", str(ds)])
        run = tmp_path / "run"
        run_cli(["train", "--data", str(ds), "--out", str(run)] + TRAIN_FAST)
        code = run_cli(
            ["filter", str(run / "checkpoint.json"), "--data", str(ds),
             "--out", str(tmp_path / "f.csv")]
        )
        assert code == 2
        assert "channels" in capsys.readouterr().err


class TestThreadCap:
    def test_cap_propagates_to_env(self, monkeypatch):
        monkeypatch.setenv("SPECTRAL2D_THREADS", "3")
        for var in cli._THREAD_VARS:
            monkeypatch.delenv(var, raising=False)
        cli._apply_thread_cap()
        assert all(os.environ[var] == "3" for var in cli._THREAD_VARS)

    def test_invalid_cap_is_usage_error(self, monkeypatch, capsys):
        monkeypatch.setenv("SPECTRAL2D_THREADS", "zero")
        assert run_cli(["verify", "spectral"]) == 2
        assert "SPECTRAL2D_THREADS" in capsys.readouterr().err
