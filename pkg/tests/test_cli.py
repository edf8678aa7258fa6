import json
from pathlib import Path

import numpy as np
import pytest

from labelreach.cli import main
from labelreach.config import load_config, parse_config
from labelreach.errors import ConfigError
from labelreach.grid import NODATA, read_grid

SMALL_CONFIG = {
    "synth": {"width": 64, "height": 64, "classes": 3, "dims": 4, "smooth_radius": 3, "seed": 5},
    "prep": {"tile": 32, "threshold": 0.001, "fractions": [0.9, 0.1], "seed": 3},
    "train": {"family": "logreg", "logreg": {"max_iters": 60}},
}


@pytest.fixture()
def workdir(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(SMALL_CONFIG))
    return tmp_path, cfg_path


def run(tmp_path, cfg_path, *argv) -> int:
    return main(["--config", str(cfg_path), "--workdir", str(tmp_path / "run"), *argv])


class TestConfig:
    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown config section 'synht'"):
            parse_config({"synht": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key 'widht'"):
            parse_config({"synth": {"widht": 4}})

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError, match="family"):
            parse_config({"train": {"family": "svm"}})

    def test_defaults(self):
        cfg = load_config(None)
        assert cfg.synth.width == 128
        assert cfg.prep.tile == 64
        assert cfg.prep.fractions == (0.9, 0.1)
        assert cfg.train.family == "logreg"

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(p)


class TestSynth:
    def test_creates_exactly_four_files(self, workdir, capsys):
        tmp_path, cfg_path = workdir
        assert run(tmp_path, cfg_path, "synth") == 0
        files = sorted(p.name for p in (tmp_path / "run").iterdir())
        assert files == ["classes.csv", "embeddings.grd", "labels.grd", "manifest.json"]
        out = capsys.readouterr().out
        assert "class_id" in out  # histogram printed

    def test_classes_one_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"synth": {"classes": 1}}))
        code = main(["--config", str(cfg), "--workdir", str(tmp_path / "w"), "synth"])
        assert code == 2
        assert "classes must be" in capsys.readouterr().err

    def test_byte_identical_reruns(self, workdir):
        tmp_path, cfg_path = workdir
        run(tmp_path, cfg_path, "synth")
        first = {p.name: p.read_bytes() for p in (tmp_path / "run").iterdir()}
        run(tmp_path, cfg_path, "synth")
        second = {p.name: p.read_bytes() for p in (tmp_path / "run").iterdir()}
        assert first == second


class TestConvert:
    def test_raw_f32_to_grd(self, workdir):
        tmp_path, cfg_path = workdir
        rng = np.random.default_rng(0)
        values = rng.normal(size=(2, 8, 8)).astype("<f4")
        raw = tmp_path / "dump.f32"
        raw.write_bytes(values.tobytes())
        code = main([
            "--workdir", str(tmp_path / "run"), "convert",
            "--input", str(raw), "--width", "8", "--height", "8", "--bands", "2",
            "--output", "converted.grd",
        ])
        assert code == 0
        back = read_grid(tmp_path / "run" / "converted.grd")
        assert np.array_equal(back.values, values)

    def test_size_mismatch_exits_3(self, workdir, capsys):
        tmp_path, cfg_path = workdir
        raw = tmp_path / "dump.f32"
        raw.write_bytes(b"\x00" * 12)
        code = main([
            "--workdir", str(tmp_path / "run"), "convert",
            "--input", str(raw), "--width", "8", "--height", "8", "--bands", "2",
            "--output", "x.grd",
        ])
        assert code == 3


class TestTrainInferEval:
    def test_full_pipeline(self, workdir):
        tmp_path, cfg_path = workdir
        assert run(tmp_path, cfg_path, "synth") == 0
        assert run(tmp_path, cfg_path, "prep") == 0
        assert run(tmp_path, cfg_path, "train", "--family", "logreg") == 0
        rundir = tmp_path / "run"
        model_doc = json.loads((rundir / "model.json").read_text())
        assert model_doc["family"] == "logreg"
        assert model_doc["n_features"] == 4
        assert run(tmp_path, cfg_path, "infer", "--model", "model.json", "--region", "embeddings.grd") == 0
        for name in ("probs.grd", "probs.grd.mask", "predicted.grd", "map.ppm"):
            assert (rundir / name).exists()
        assert run(
            tmp_path, cfg_path, "eval",
            "--pred", "predicted.grd", "--truth", "labels_prepped.grd",
        ) == 0
        metrics_doc = json.loads((rundir / "metrics.json").read_text())
        assert metrics_doc["accuracy"] > 0.9
        for name in ("confusion.csv", "per_class.csv", "metrics_table.md", "confusion.png", "per_class.png"):
            assert (rundir / name).exists()
        assert run(tmp_path, cfg_path, "report", "--row", "logreg", "full", "metrics.json") == 0
        assert (rundir / "metrics.png").exists()

    def test_unknown_family_exits_2(self, workdir):
        tmp_path, cfg_path = workdir
        run(tmp_path, cfg_path, "synth")
        assert run(tmp_path, cfg_path, "train", "--family", "svm") == 2

    def test_forest_retrain_identical(self, workdir):
        tmp_path, cfg_path = workdir
        cfg = json.loads(cfg_path.read_text())
        cfg["train"] = {"family": "forest", "forest": {"n_trees": 3}}
        cfg_path.write_text(json.dumps(cfg))
        run(tmp_path, cfg_path, "synth")
        assert run(tmp_path, cfg_path, "train", "--family", "forest") == 0
        first = (tmp_path / "run" / "model.json").read_bytes()
        assert run(tmp_path, cfg_path, "train", "--family", "forest") == 0
        assert (tmp_path / "run" / "model.json").read_bytes() == first

    def test_gbt_training_log_monotone(self, workdir):
        tmp_path, cfg_path = workdir
        cfg = json.loads(cfg_path.read_text())
        cfg["train"] = {"family": "gbt", "gbt": {"n_rounds": 12}}
        cfg_path.write_text(json.dumps(cfg))
        run(tmp_path, cfg_path, "synth")
        assert run(tmp_path, cfg_path, "train", "--family", "gbt") == 0
        lines = (tmp_path / "run" / "train_log.csv").read_text().splitlines()
        assert lines[0] == "round,loss"
        losses = [float(l.split(",")[1]) for l in lines[1:]]
        assert len(losses) == 13
        assert all(b <= a + 1e-9 for a, b in zip(losses, losses[1:]))

    def test_incompatible_bands_exits_3(self, workdir, capsys):
        tmp_path, cfg_path = workdir
        run(tmp_path, cfg_path, "synth")
        run(tmp_path, cfg_path, "train", "--family", "logreg")
        other = tmp_path / "other.json"
        other.write_text(json.dumps({"synth": {"width": 32, "height": 32, "dims": 6, "classes": 3}}))
        assert main(["--config", str(other), "--workdir", str(tmp_path / "run2"), "synth"]) == 0
        code = main([
            "--workdir", str(tmp_path / "run"), "infer",
            "--model", "model.json", "--region", str(tmp_path / "run2" / "embeddings.grd"),
        ])
        assert code == 3
        assert "refusing" in capsys.readouterr().err

    def test_pixel_model_stride_invariant_through_cli(self, workdir):
        tmp_path, cfg_path = workdir
        run(tmp_path, cfg_path, "synth")
        run(tmp_path, cfg_path, "train", "--family", "logreg")
        assert run(tmp_path, cfg_path, "infer", "--stride", "16") == 0
        first = (tmp_path / "run" / "probs.grd").read_bytes()
        assert run(tmp_path, cfg_path, "infer", "--stride", "32") == 0
        assert (tmp_path / "run" / "probs.grd").read_bytes() == first

    def test_eval_dimension_mismatch_exits_3(self, workdir):
        tmp_path, cfg_path = workdir
        run(tmp_path, cfg_path, "synth")
        other = tmp_path / "other.json"
        other.write_text(json.dumps({"synth": {"width": 32, "height": 32, "dims": 4, "classes": 3}}))
        main(["--config", str(other), "--workdir", str(tmp_path / "run2"), "synth"])
        code = main([
            "--workdir", str(tmp_path / "run"), "eval",
            "--pred", str(tmp_path / "run2" / "labels.grd"), "--truth", "labels.grd",
        ])
        assert code == 3

    def test_eval_perfect_prediction(self, workdir):
        tmp_path, cfg_path = workdir
        run(tmp_path, cfg_path, "synth")
        code = main([
            "--workdir", str(tmp_path / "run"), "eval",
            "--pred", "labels.grd", "--truth", "labels.grd",
        ])
        assert code == 0
        doc = json.loads((tmp_path / "run" / "metrics.json").read_text())
        assert doc["accuracy"] == 1.0
        assert doc["macro_f1"] == 1.0

    def test_bands_eval_writes_reports(self, workdir):
        tmp_path, cfg_path = workdir
        cfg = json.loads(cfg_path.read_text())
        cfg["eval"] = {"bands": [0, 32, 64]}
        cfg_path.write_text(json.dumps(cfg))
        run(tmp_path, cfg_path, "synth")
        assert run(tmp_path, cfg_path, "eval", "--pred", "labels.grd", "--truth", "labels.grd") == 0
        doc = json.loads((tmp_path / "run" / "band_reports.json").read_text())
        assert len(doc) == 2
        assert (tmp_path / "run" / "band_decay.png").exists()


class TestLock:
    def test_stale_lock_exits_1(self, workdir, capsys):
        tmp_path, cfg_path = workdir
        rundir = tmp_path / "run"
        rundir.mkdir()
        (rundir / ".labelreach.lock").write_text("123")
        assert run(tmp_path, cfg_path, "synth") == 1
        assert "locked" in capsys.readouterr().err

    def test_lock_released_after_run(self, workdir):
        tmp_path, cfg_path = workdir
        run(tmp_path, cfg_path, "synth")
        assert not (tmp_path / "run" / ".labelreach.lock").exists()


class TestThreadsEnv:
    def test_invalid_value_exits_2(self, workdir, monkeypatch):
        tmp_path, cfg_path = workdir
        monkeypatch.setenv("LABELREACH_THREADS", "lots")
        assert run(tmp_path, cfg_path, "synth") == 2

    def test_thread_cap_does_not_change_bytes(self, workdir, monkeypatch):
        tmp_path, cfg_path = workdir
        monkeypatch.setenv("LABELREACH_THREADS", "1")
        run(tmp_path, cfg_path, "synth")
        first = (tmp_path / "run" / "embeddings.grd").read_bytes()
        monkeypatch.setenv("LABELREACH_THREADS", "8")
        run(tmp_path, cfg_path, "synth")
        assert (tmp_path / "run" / "embeddings.grd").read_bytes() == first
