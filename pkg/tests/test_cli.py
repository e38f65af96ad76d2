import json
from pathlib import Path

import numpy as np
import pytest

from conftest import write_config
from main import main
from prefdata import read_jsonl
from scoring import RewardScorer
from utils.artifacts import RunManifest
from utils.gradcheck import CheckResult

GEN = {"n": 120, "d": 3, "K": 2, "seed": 7}
TRAIN = {"K": 2, "epochs": 2, "batch_size": 32, "seed": 1}


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data" / "train.jsonl"
    assert main(["gen", "--config", write_config(tmp_path / "gen.json", GEN), "--out", str(out)]) == 0
    return out


@pytest.fixture
def trained(tmp_path, dataset):
    out = tmp_path / "run"
    assert main(["train", "--config", write_config(tmp_path / "train.json", TRAIN),
                 "--data", str(dataset), "--out", str(out)]) == 0
    return out


class TestGen:

    def test_outputs(self, dataset):
        meta = read(dataset.with_name("train.meta.json"))
        manifest = read(dataset.with_name("train.manifest.json"))
        assert meta["K"] == 2 and meta["n"] == 120
        assert meta["manifest_digest"] == manifest["manifest_digest"]
        assert set(manifest["artifacts"]) == {"train.jsonl", "train.meta.json"}
        assert read_jsonl(dataset).n == 120

    def test_rerun_is_byte_identical(self, tmp_path, dataset):
        again = tmp_path / "again" / "train.jsonl"
        assert main(["gen", "--config", str(tmp_path / "gen.json"), "--out", str(again)]) == 0
        assert again.read_bytes() == dataset.read_bytes()
        assert again.with_name("train.meta.json").read_bytes() == dataset.with_name("train.meta.json").read_bytes()

    def test_invalid_config(self, tmp_path, capsys):
        code = main(["gen", "--config", write_config(tmp_path / "bad.json", {"n": 0}), "--out", str(tmp_path / "x.jsonl")])
        assert code == 3
        assert "invalid configuration" in capsys.readouterr().err
        assert not (tmp_path / "x.jsonl").exists()

    def test_malformed_config(self, tmp_path):
        (tmp_path / "broken.json").write_text("{not json")
        assert main(["gen", "--config", str(tmp_path / "broken.json"), "--out", str(tmp_path / "x.jsonl")]) == 3


class TestNoise:

    def test_writes_noisy_copy(self, tmp_path, dataset, capsys):
        out = tmp_path / "noisy.jsonl"
        assert main(["noise", "--data", str(dataset), "--kind", "shift", "--rate", "0.5", "--seed", "3",
                     "--out", str(out)]) == 0
        noisy = read_jsonl(out)
        clean = read_jsonl(dataset)
        np.testing.assert_array_equal(noisy.z_clean, clean.z)
        assert noisy.metadata["noise"]["kind"] == "shift"
        assert "selected" in capsys.readouterr().out
        assert read(tmp_path / "noisy.manifest.json")["command"] == ["noise", "--kind=shift", "--rate=0.5"]

    def test_rate_out_of_range(self, tmp_path, dataset):
        code = main(["noise", "--data", str(dataset), "--kind", "random", "--rate", "1.5", "--out", str(tmp_path / "n.jsonl")])
        assert code == 2


class TestTrain:

    def test_artifacts(self, trained):
        names = {p.name for p in trained.iterdir()}
        assert {"model.json", "thresholds.json", "trajectory.csv", "loss.csv", "report.json", "manifest.json"} <= names
        manifest = read(trained / "manifest.json")
        for name in ("model.json", "thresholds.json", "report.json"):
            assert read(trained / name)["manifest_digest"] == manifest["manifest_digest"]
        assert manifest["command"] == ["train", "--loss=ordinal_nll"]
        report = read(trained / "report.json")
        assert report["config"]["lambda"] == 1.0 and report["steps"] == 8

    def test_trajectory_header(self, trained):
        lines = (trained / "trajectory.csv").read_text().splitlines()
        assert lines[0] == "step,zeta_-2,zeta_-1,zeta_1,zeta_2"
        assert len(lines) == 1 + 9

    def test_bt_writes_no_thresholds(self, tmp_path, dataset):
        out = tmp_path / "bt"
        assert main(["train", "--config", str(write_config(tmp_path / "t.json", TRAIN)), "--data", str(dataset),
                     "--out", str(out), "--loss", "simple_bt"]) == 0
        assert not (out / "thresholds.json").exists()
        assert (out / "trajectory.csv").read_text().splitlines() == ["step"]
        assert read(out / "manifest.json")["extra"]["skipped_per_epoch"] == int((read_jsonl(dataset).z == 0).sum())

    def test_resume_rejected(self, tmp_path, dataset):
        code = main(["train", "--config", write_config(tmp_path / "t.json", TRAIN), "--data", str(dataset),
                     "--out", str(tmp_path / "r"), "--resume-from", "ckpt"])
        assert code == 2

    def test_seed_and_seeds_conflict(self, tmp_path, dataset):
        code = main(["train", "--config", write_config(tmp_path / "t.json", TRAIN), "--data", str(dataset),
                     "--out", str(tmp_path / "r"), "--seed", "1", "--seeds", "1,2"])
        assert code == 2

    def test_k_mismatch(self, tmp_path, dataset):
        code = main(["train", "--config", write_config(tmp_path / "t.json", {**TRAIN, "K": 3}), "--data", str(dataset),
                     "--out", str(tmp_path / "r")])
        assert code == 3
        assert not (tmp_path / "r").exists()

    def test_multiple_seeds(self, tmp_path, dataset):
        out = tmp_path / "multi"
        assert main(["train", "--config", write_config(tmp_path / "t.json", TRAIN), "--data", str(dataset),
                     "--out", str(out), "--seeds", "0,1"]) == 0
        first = read(out / "seed_0" / "model.json")
        second = read(out / "seed_1" / "model.json")
        assert first["params"] != second["params"]
        assert read(out / "seed_1" / "manifest.json")["seeds"] == [1]

    def test_rerun_is_byte_identical(self, tmp_path, dataset, trained):
        again = tmp_path / "again"
        assert main(["train", "--config", str(tmp_path / "train.json"), "--data", str(dataset), "--out", str(again)]) == 0
        for name in ("model.json", "thresholds.json", "trajectory.csv", "loss.csv", "report.json"):
            assert (again / name).read_bytes() == (trained / name).read_bytes()

    def test_validation_checkpoints(self, tmp_path, dataset):
        out = tmp_path / "val"
        assert main(["train", "--config", write_config(tmp_path / "t.json", TRAIN), "--data", str(dataset),
                     "--val", str(dataset), "--out", str(out)]) == 0
        assert (out / "best_model.json").exists() and (out / "best_thresholds.json").exists()
        assert len(read(out / "report.json")["checkpoints"]) == 2


class TestEval:

    def test_binary_only(self, tmp_path, dataset, trained, capsys):
        out = tmp_path / "eval.json"
        assert main(["eval", "--model", str(trained / "model.json"), "--data", str(dataset), "--out", str(out)]) == 0
        report = read(out)
        assert "mae" not in report and 0.0 <= report["binary_accuracy"] <= 1.0
        assert "binary_accuracy" in capsys.readouterr().out

    def test_ordinal_with_csv(self, tmp_path, dataset, trained):
        out = tmp_path / "eval.json"
        assert main(["eval", "--model", str(trained / "model.json"), "--thresholds", str(trained / "thresholds.json"),
                     "--data", str(dataset), "--out", str(out), "--ordinal", "--csv"]) == 0
        report = read(out)
        assert report["mae"] is not None and set(report["acc_within"]) == {"0", "1", "2"}
        confusion = (tmp_path / "eval.confusion.csv").read_text().splitlines()
        assert confusion[0] == "true_level,pred_-2,pred_-1,pred_0,pred_1,pred_2" and len(confusion) == 6
        assert (tmp_path / "eval.margins.csv").read_text().startswith("bin_lo,bin_hi,count")
        manifest = read(tmp_path / "eval.manifest.json")
        assert {"eval.json", "eval.confusion.csv", "eval.margins.csv"} == set(manifest["artifacts"])

    def test_ordinal_needs_thresholds(self, tmp_path, dataset, trained):
        code = main(["eval", "--model", str(trained / "model.json"), "--data", str(dataset),
                     "--out", str(tmp_path / "e.json"), "--ordinal"])
        assert code == 2

    def test_missing_model(self, tmp_path, dataset):
        out = tmp_path / "e.json"
        code = main(["eval", "--model", str(tmp_path / "nope.json"), "--data", str(dataset), "--out", str(out)])
        assert code == 3
        assert not out.exists()


class TestCalibrate:

    def test_writes_ordered_thresholds(self, tmp_path, dataset, trained):
        out = tmp_path / "calib.json"
        assert main(["calibrate", "--model", str(trained / "model.json"), "--data", str(dataset),
                     "--out", str(out), "--K", "2", "--epochs", "20"]) == 0
        payload = read(out)
        assert payload["mode"] == "asymmetric" and len(payload["zeta"]) == 4
        assert np.all(np.diff(payload["zeta"]) > 0)
        model = read(trained / "model.json")
        assert payload["frozen_scorer_digest"] == RewardScorer.from_dict(model).digest
        assert read(tmp_path / "calib.manifest.json")["extra"]["frozen_scorer_digest"] == payload["frozen_scorer_digest"]

    def test_k_mismatch(self, tmp_path, dataset, trained):
        code = main(["calibrate", "--model", str(trained / "model.json"), "--data", str(dataset),
                     "--out", str(tmp_path / "c.json"), "--K", "3"])
        assert code == 3


class TestGradcheck:

    def test_passes(self, capsys):
        assert main(["gradcheck", "--draws", "5"]) == 0
        out = capsys.readouterr().out
        assert "loss/ordinal_nll" in out and "FAIL" not in out

    def test_failure_exits_with_numeric_code(self, monkeypatch, capsys):
        import utils.gradcheck

        def broken(seed, draws):
            return [CheckResult("loss/ordinal_nll", draws, 0.5, False, [0, 2])]

        monkeypatch.setattr(utils.gradcheck, "run_gradcheck", broken)
        assert main(["gradcheck", "--draws", "3"]) == 4
        err = capsys.readouterr().err
        assert "FAILED loss/ordinal_nll: draws [0, 2]" in err
        assert "1 of 1 gradient checks failed" in err


def _files(root):
    return [p for p in root.rglob("*") if p.is_file()] if root.exists() else []


class TestFailedWrites:

    def test_gen_keeps_nothing_when_manifest_fails(self, tmp_path, monkeypatch):
        def full_disk(self, path):
            raise OSError("disk full")

        monkeypatch.setattr(RunManifest, "write", full_disk)
        out = tmp_path / "data" / "train.jsonl"
        with pytest.raises(OSError, match="disk full"):
            main(["gen", "--config", write_config(tmp_path / "gen.json", GEN), "--out", str(out)])
        assert _files(out.parent) == []

    def test_train_removes_earlier_artifacts(self, tmp_path, dataset, monkeypatch):
        import utils.artifacts

        real = utils.artifacts.write_csv

        def flaky(path, header, rows):
            if Path(path).name == "loss.csv":
                raise OSError("disk full")
            return real(path, header, rows)

        monkeypatch.setattr(utils.artifacts, "write_csv", flaky)
        out = tmp_path / "runs"
        with pytest.raises(OSError, match="disk full"):
            main(["train", "--config", write_config(tmp_path / "train.json", TRAIN),
                  "--data", str(dataset), "--out", str(out), "--seeds", "0,1"])
        assert _files(out) == []
