import csv

import numpy as np
import pytest

from metascreen import cli
from metascreen.pipeline import load_dataset
from metascreen.screen import PixelGrid, format_grid, random_pattern

TINY = [
    "data.n=20", "data.freq_count=64", "model.hidden_size=8", "model.patch=8", "train.epochs=1",
    "experiment.families=cnn", "experiment.channels=amp_x", "experiment.repeats=3",
]


def run(*argv, sets=TINY):
    args = list(argv)
    for s in sets:
        args += ["--set", s]
    return cli.main(args)


def test_gen_deterministic_guarded_and_regenerable(tmp_path, capsys):
    assert run("gen", "--output-dir", str(tmp_path / "a"), sets=["data.n=16"]) == 0
    out_a = capsys.readouterr().out
    assert run("gen", "--output-dir", str(tmp_path / "b"), sets=["data.n=16"]) == 0
    out_b = capsys.readouterr().out
    assert "16 samples" in out_a
    assert out_a.split("sha256")[1] == out_b.split("sha256")[1]
    assert (tmp_path / "a/dataset.msds").read_bytes() == (tmp_path / "b/dataset.msds").read_bytes()
    assert (tmp_path / "a/dataset.msds.config.ini").exists()
    assert run("gen", "--output-dir", str(tmp_path / "a"), sets=["data.n=16"]) != 0
    assert "refusing" in capsys.readouterr().err
    assert run("gen", "--output-dir", str(tmp_path / "a"), "--force", sets=["data.n=16"]) == 0
    ds = load_dataset(tmp_path / "a/dataset.msds")
    assert len(ds) == 16 and ds.verify() == []


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert run("gen", sets=["data.n=10", "data.freq_count=64"]) == 0
    assert (tmp_path / "env/dataset.msds").exists()


@pytest.mark.parametrize("bad", ["model.colour=red", "nosuch.key=1", "data.n=ten", "noequals", "model.hidden_size"])
def test_bad_settings_rejected(tmp_path, capsys, bad):
    assert run("gen", "--output-dir", str(tmp_path), sets=[bad]) != 0
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "dataset.msds").exists()


def test_unknown_key_in_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[data]\nn = 12\nsamples = 3\n")
    assert cli.main(["gen", "--config", str(cfg), "--output-dir", str(tmp_path)]) != 0
    assert "samples" in capsys.readouterr().err


def test_snapshot_round_trips_settings():
    s = cli.load_settings(None, TINY)
    again = cli.load_settings(None, [])
    assert s.snapshot() != again.snapshot()
    import configparser
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_string(s.snapshot())
    assert parser["data"]["n"] == "20" and parser["model"]["patch"] == "8"


def test_train_checkpoints_reproducible(tmp_path, capsys):
    out = tmp_path / "o"
    assert run("gen", "--output-dir", str(out)) == 0
    assert run("train", "--output-dir", str(out), sets=TINY + ["paths.dataset=dataset.msds"]) == 0
    dest = out / "train/cnn_forward_amp_x-low_supp-none"
    report = (dest / "report.csv").read_bytes()
    assert sorted(p.name for p in dest.glob("fold*.ckpt")) == [f"fold{i}.ckpt" for i in range(5)]
    assert run("train", "--output-dir", str(out), sets=TINY + ["paths.dataset=dataset.msds"]) != 0
    assert run("train", "--output-dir", str(out), "--force", sets=TINY + ["paths.dataset=dataset.msds"]) == 0
    assert (dest / "report.csv").read_bytes() == report
    from metascreen.models.estimators import _NetworkEstimator
    est = _NetworkEstimator.load(dest / "fold0.ckpt")
    ds = load_dataset(out / "dataset.msds")
    assert np.array_equal(est.predict(ds.grids), _NetworkEstimator.load(dest / "fold0.ckpt").predict(ds.grids))


def test_train_rejects_supplement_equal_to_target(tmp_path, capsys):
    assert run("train", "--output-dir", str(tmp_path), sets=TINY + ["model.supplement_band=low"]) != 0
    assert "supplement" in capsys.readouterr().err
    assert not (tmp_path / "train").exists()


def test_train_missing_dataset(tmp_path, capsys):
    assert run("train", "--output-dir", str(tmp_path), sets=TINY + ["paths.dataset=nope.msds"]) != 0
    assert "not found" in capsys.readouterr().err


@pytest.mark.parametrize("study", ["augmentation", "asymmetry", "inverse"])
def test_experiment_outputs_and_snapshot_reproduction(tmp_path, study):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("experiment", study, "--output-dir", str(a)) == 0
    files = sorted(p.relative_to(a / study).as_posix() for p in (a / study).rglob("*.csv"))
    assert {"report.csv", "summary.csv", "timing.csv"} <= set(files)
    assert any(f.startswith("plots/") for f in files)
    snapshot = a / study / "config.ini"
    assert cli.main(["experiment", study, "--config", str(snapshot), "--output-dir", str(b)]) == 0
    for name in ("report.csv", "summary.csv"):
        assert (a / study / name).read_bytes() == (b / study / name).read_bytes()
    rows = list(csv.DictReader((a / study / "report.csv").open()))
    if study == "inverse":
        assert any(r["family"] == "constant-0.5" and float(r["test_mse"]) == 0.25 for r in rows)
    if study == "asymmetry":
        assert (a / study / "asymmetry.csv").exists()
        assert {r["variant"].split(";")[0] for r in rows} == {"damping=on", "damping=off"}
    if study == "augmentation":
        plot = next((a / study / "plots").glob("*supp-high.csv"))
        header = plot.read_text().splitlines()[0]
        assert header == "f_thz,truth,prediction,band_role"


def test_failed_experiment_leaves_no_partial_outputs(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "_write_plots", boom)
    assert run("experiment", "augmentation", "--output-dir", str(tmp_path)) != 0
    leftovers = [p for p in (tmp_path / "augmentation").rglob("*")]
    assert leftovers == []


def _trained_checkpoint(tmp_path, extra=()):
    out = tmp_path / "o"
    assert run("train", "--output-dir", str(out), sets=TINY + list(extra)) == 0
    return next((out / "train").glob("*/fold0.ckpt"))


def test_export(tmp_path, capsys):
    ckpt = _trained_checkpoint(tmp_path, ["model.supplement_band=high"])
    zero = tmp_path / "zero.txt"
    zero.write_text(format_grid(PixelGrid.zeros()))
    assert cli.main(["export", "--checkpoint", str(ckpt), "--pattern", str(zero), "--output", str(tmp_path / "e.csv")]) == 0
    rows = list(csv.DictReader((tmp_path / "e.csv").open()))
    assert len(rows) == 64
    assert all(float(r["oracle_amp_y"]) <= 0.01 for r in rows)
    assert sum(r["predicted_amp_x"] != "" for r in rows) == 32
    first = (tmp_path / "e.csv").read_bytes()
    assert cli.main(["export", "--checkpoint", str(ckpt), "--pattern", str(zero), "--output", str(tmp_path / "e.csv"), "--force"]) == 0
    assert (tmp_path / "e.csv").read_bytes() == first
    assert cli.main(["export", "--checkpoint", str(ckpt), "--pattern", str(zero), "--output", str(tmp_path / "e.csv")]) != 0


def test_export_truncated_pattern_names_line(tmp_path, capsys):
    ckpt = _trained_checkpoint(tmp_path)
    bad = tmp_path / "bad.txt"
    bad.write_text("".join(format_grid(random_pattern(1, 0.5)).splitlines(True)[:24]))
    assert cli.main(["export", "--checkpoint", str(ckpt), "--pattern", str(bad), "--output", str(tmp_path / "x.csv")]) != 0
    assert "line 25" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()


def test_version_and_help(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["--version"])
    assert e.value.code == 0
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code != 0
