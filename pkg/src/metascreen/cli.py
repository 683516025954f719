"""Command-line front end: ``metascreen {gen,train,experiment,export}``.

Settings come from built-in defaults, then an optional INI file given with
``--config``, then repeated ``--set section.key=value`` overrides.  Every run
writes the fully resolved settings next to its outputs; feeding that file back
with ``--config`` reproduces the run.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._errors import DomainError
from .autograd.checkpoint import atomic_write_bytes
from .models.config import ModelConfig, other_band
from .models.estimators import BandTransferRegressor, ForwardSpectrumRegressor, _NetworkEstimator
from .pipeline.dataset import generate_dataset, load_dataset, save_dataset
from .pipeline.folds import kfold
from .pipeline.report import ExperimentReport
from .pipeline.studies import (
    INVERSE_PLOT_COLUMNS,
    PLOT_COLUMNS,
    run_asymmetry_study,
    run_augmentation_study,
    run_inverse_study,
)
from .pipeline.training import TrainConfig, train_eval
from .screen import read_grid
from .surrogate import DrudeParams, FrequencyGrid, OracleConfig, band_indices, simulate

OUTPUT_ENV = "METASCREEN_OUTPUT_DIR"
STUDIES = ("augmentation", "asymmetry", "inverse")


def _strs(v: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in v.split(",") if s.strip())


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


# section -> key -> (parser, default as text)
SCHEMA: dict[str, dict[str, tuple]] = {
    "paths": {
        "output_dir": (str, ""),
        "dataset": (str, ""),
    },
    "data": {
        "n": (int, "512"),
        "seed": (int, "3"),
        "fill_lo": (float, "0.2"),
        "fill_hi": (float, "0.8"),
        "freq_count": (int, "1024"),
        "f_min": (float, "0.002"),
        "f_max": (float, "2.0"),
    },
    "oracle": {
        "omega_p": (float, "2.24e16"),
        "gamma": (float, "1.22e14"),
        "t0": (float, "0.7"),
        "alpha": (float, "0.5"),
        "eta0": (float, "0.01"),
        "tau": (float, "4.0"),
        "ohmic_scale": (float, "1.0"),
    },
    "model": {
        "family": (str, "cnn"),
        "direction": (str, "forward"),
        "input_mode": (str, "auto"),
        "hidden_size": (int, "128"),
        "depth": (int, "2"),
        "attention_heads": (int, "4"),
        "supplement_band": (str, "none"),
        "channel": (str, "amp_x"),
        "band": (str, "low"),
        "spectrum_channels": (_strs, "amp_x,amp_y,phase"),
        "patch": (int, "16"),
        "seed": (int, "0"),
    },
    "train": {
        "epochs": (int, "20"),
        "batch_size": (int, "8"),
        "learning_rate": (float, "0.001"),
        "beta1": (float, "0.9"),
        "beta2": (float, "0.999"),
        "epsilon": (float, "1e-08"),
        "shuffle_seed": (int, "0"),
        "folds": (int, "5"),
        "split_seed": (int, "0"),
        "n_jobs": (int, "1"),
    },
    "experiment": {
        "families": (_strs, "cnn,lstm,gru,transformer"),
        "channels": (_strs, "amp_x,amp_y,phase"),
        "bands": (_strs, "low,high"),
        "repeats": (int, "5"),
        "asymmetry_family": (str, "cnn"),
        "asymmetry_channels": (_strs, "amp_x,amp_y"),
        "inverse_families": (_strs, "transformer"),
    },
}


class Settings:
    """Resolved, typed settings plus the raw text used for the snapshot."""

    def __init__(self, raw: dict[str, dict[str, str]]):
        self.raw = raw
        self.values: dict[str, dict] = {}
        for section, keys in SCHEMA.items():
            self.values[section] = {}
            for key, (conv, _) in keys.items():
                text = raw[section][key]
                try:
                    self.values[section][key] = conv(text)
                except ValueError as exc:
                    raise DomainError(f"[{section}] {key} = {text!r}: {exc}") from None

    def __getitem__(self, section):
        return self.values[section]

    def snapshot(self) -> str:
        lines = [f"# metascreen {__version__} resolved settings"]
        for section in SCHEMA:
            lines.append(f"\n[{section}]")
            for key in SCHEMA[section]:
                lines.append(f"{key} = {self.raw[section][key]}")
        return "\n".join(lines) + "\n"

    # typed views
    def freq(self) -> FrequencyGrid:
        d = self["data"]
        return FrequencyGrid(d["freq_count"], d["f_min"], d["f_max"])

    def oracle(self) -> OracleConfig:
        o = self["oracle"]
        return OracleConfig(DrudeParams(o["omega_p"], o["gamma"]), o["t0"], o["alpha"], o["eta0"], o["tau"],
                            o["ohmic_scale"])

    def train_config(self) -> TrainConfig:
        t = self["train"]
        return TrainConfig(t["epochs"], t["batch_size"], t["learning_rate"], t["beta1"], t["beta2"],
                           t["epsilon"], t["shuffle_seed"])

    def model_overrides(self) -> dict:
        m = dict(self["model"])
        if m["input_mode"] == "auto":
            m["input_mode"] = None
        return m

    def model_config(self, band_size: int) -> ModelConfig:
        return ModelConfig(**self.model_overrides(), band_size=band_size)


def load_settings(config_path=None, overrides=()) -> Settings:
    raw = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}

    def put(section, key, value, origin):
        if section not in SCHEMA:
            raise DomainError(f"{origin}: unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise DomainError(f"{origin}: unknown key {key!r} in [{section}]")
        raw[section][key] = value.strip()

    if config_path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(config_path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise DomainError(f"{config_path}: {exc}") from None
        for section in parser.sections():
            for key, value in parser.items(section):
                put(section, key, value, str(config_path))
    for item in overrides:
        lhs, sep, value = item.partition("=")
        section, dot, key = lhs.strip().partition(".")
        if not sep or not dot:
            raise DomainError(f"--set expects section.key=value, got {item!r}")
        put(section, key, value, "--set")
    return Settings(raw)


def output_dir(settings: Settings, cli_value) -> Path:
    chosen = cli_value or settings["paths"]["output_dir"] or os.environ.get(OUTPUT_ENV) or "."
    return Path(chosen)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for v in row])
    return buf.getvalue()


def _guard(paths, force: bool):
    existing = [str(p) for p in paths if Path(p).exists()]
    if existing and not force:
        raise FileExistsError(f"refusing to overwrite {', '.join(existing)} (use --force)")


class _Staging:
    """Collects outputs in a temporary directory and moves them into place on success."""

    def __init__(self, dest: Path):
        self.dest = dest
        self.files: list[str] = []

    def __enter__(self):
        self.dest.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.dest))
        return self

    def write(self, rel: str, data) -> None:
        path = self.tmp / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data.encode() if isinstance(data, str) else data)
        self.files.append(rel)

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is None:
                for rel in self.files:
                    target = self.dest / rel
                    target.parent.mkdir(parents=True, exist_ok=True)
                    os.replace(self.tmp / rel, target)
        finally:
            shutil.rmtree(self.tmp, ignore_errors=True)
        return False


def _dataset_for(settings: Settings, out: Path):
    path = settings["paths"]["dataset"]
    if path:
        p = Path(path)
        if not p.is_absolute() and not p.exists():
            p = out / p
        if not p.exists():
            raise FileNotFoundError(f"dataset file {path} not found")
        return load_dataset(p)
    d = settings["data"]
    return generate_dataset(d["n"], d["seed"], (d["fill_lo"], d["fill_hi"]), settings.freq(), settings.oracle())


def cmd_gen(settings: Settings, out: Path, force: bool) -> int:
    d = settings["data"]
    ds = generate_dataset(d["n"], d["seed"], (d["fill_lo"], d["fill_hi"]), settings.freq(), settings.oracle())
    target = Path(settings["paths"]["dataset"] or out / "dataset.msds")
    snapshot = target.with_suffix(target.suffix + ".config.ini")
    _guard([target], force)
    target.parent.mkdir(parents=True, exist_ok=True)
    digest = save_dataset(ds, target)
    atomic_write_bytes(snapshot, settings.snapshot().encode())
    print(f"wrote {len(ds)} samples to {target}")
    print(f"sha256 {digest}")
    return 0


def cmd_train(settings: Settings, out: Path, force: bool) -> int:
    # validate the model settings before touching the dataset
    settings.model_config(settings["data"]["freq_count"] // 2)
    ds = _dataset_for(settings, out)
    config = settings.model_config(ds.band_size(settings["model"]["band"]))
    t = settings["train"]
    split = kfold(len(ds), t["folds"], t["split_seed"])
    name = f"{config.family}_{config.direction}_{config.target.replace(':', '-').replace('+', '_')}" \
           f"_supp-{config.supplement_band}"
    dest = out / "train" / name
    _guard([dest / "report.csv"], force)
    rows, models = train_eval(ds, config, settings.train_config(), split, n_jobs=t["n_jobs"], return_models=True)
    report = ExperimentReport(rows)
    meta = {"oracle": ds.oracle.to_dict(), "freq": [ds.freq.count, ds.freq.f_min, ds.freq.f_max]}
    with _Staging(dest) as stage:
        for fold, est in enumerate(models):
            path = stage.tmp / f"fold{fold}.ckpt"
            est.save(path, {**meta, "fold": fold})
            stage.files.append(path.name)
        stage.write("report.csv", report.to_csv())
        stage.write("summary.csv", report.summary_csv())
        stage.write("timing.csv", report.timing_csv())
        stage.write("config.ini", settings.snapshot())
    for s in report.aggregate().values():
        print(f"{'/'.join(x for x in s.key if x)}: test MSE {s.mean:.6g} +/- {s.std:.3g} over {s.folds} folds")
    print(f"outputs in {dest}")
    return 0


def _write_plots(stage: _Staging, plots: dict, header) -> None:
    for stem, rows in sorted(plots.items()):
        stage.write(f"plots/{stem}.csv", _csv_text(header, rows))


def cmd_experiment(settings: Settings, out: Path, force: bool, study: str) -> int:
    e, t = settings["experiment"], settings["train"]
    dest = out / study
    _guard([dest / "report.csv"], force)
    ds = _dataset_for(settings, out)
    split = kfold(len(ds), t["folds"], t["split_seed"])
    tc = settings.train_config()
    overrides = settings.model_overrides()
    for key in ("family", "direction", "supplement_band", "channel", "band", "spectrum_channels", "input_mode"):
        overrides.pop(key)
    extra = {}
    if study == "augmentation":
        report, plots = run_augmentation_study(ds, e["families"], tc, channels=e["channels"], bands=e["bands"],
                                               split=split, model_overrides=overrides, n_jobs=t["n_jobs"])
        plot_header = PLOT_COLUMNS
    elif study == "asymmetry":
        report, results, plots = run_asymmetry_study(ds, e["asymmetry_family"], tc, e["repeats"],
                                                     channels=e["asymmetry_channels"], split=split,
                                                     model_overrides=overrides, n_jobs=t["n_jobs"])
        rows = []
        for mode, res in results.items():
            for r, (lh, hl) in enumerate(zip(res.repeat_low_to_high, res.repeat_high_to_low)):
                rows.append((mode, r, lh, hl, hl / lh))
            rows.append((mode, "mean", res.mse_low_to_high, res.mse_high_to_low, res.ratio_mean))
        extra["asymmetry.csv"] = _csv_text(
            ("damping", "repeat", "mse_low_to_high", "mse_high_to_low", "ratio"), rows)
        plot_header = PLOT_COLUMNS
    else:
        report, plots = run_inverse_study(ds, e["inverse_families"], tc, band=settings["model"]["band"],
                                          channels=settings["model"]["spectrum_channels"], split=split,
                                          model_overrides=overrides, n_jobs=t["n_jobs"])
        plot_header = INVERSE_PLOT_COLUMNS
    with _Staging(dest) as stage:
        stage.write("report.csv", report.to_csv())
        stage.write("summary.csv", report.summary_csv())
        stage.write("timing.csv", report.timing_csv())
        for name, text in extra.items():
            stage.write(name, text)
        _write_plots(stage, plots, plot_header)
        stage.write("config.ini", settings.snapshot())
    print(report.summary_csv(), end="")
    if "asymmetry.csv" in extra:
        print(extra["asymmetry.csv"], end="")
    print(f"outputs in {dest}")
    return 0


def cmd_export(checkpoint: Path, pattern: Path, target: Path, force: bool) -> int:
    grid = read_grid(pattern)
    est = _NetworkEstimator.load(checkpoint)
    cfg = est.model_.config
    meta = getattr(est, "metadata_", {})
    oracle = OracleConfig.from_dict(meta["oracle"]) if "oracle" in meta else OracleConfig()
    freq = FrequencyGrid(*meta["freq"]) if "freq" in meta else FrequencyGrid()
    truth = simulate(grid, freq, oracle)
    band = band_indices(freq, cfg.band)
    if isinstance(est, ForwardSpectrumRegressor):
        supp = None
        if cfg.supplement_band != "none":
            supp = truth.channel(cfg.channel)[band_indices(freq, cfg.supplement_band)][None]
        pred = {cfg.channel: est.predict([grid], supp)[0]}
    elif isinstance(est, BandTransferRegressor):
        src = band_indices(freq, other_band(cfg.band))
        X = np.stack([truth.channel(c)[src] for c in cfg.spectrum_channels], axis=-1)[None]
        out = est.predict(X)[0]
        pred = {c: out[:, k] for k, c in enumerate(cfg.spectrum_channels)}
    else:
        raise DomainError("export needs a forward or transfer checkpoint")
    _guard([target], force)
    names = sorted(pred, key=("amp_x", "amp_y", "phase").index)
    rows = []
    for i, f in enumerate(freq.points):
        inside = band.start <= i < band.stop
        row = [f, truth.amp_x[i], truth.amp_y[i], truth.phase[i]]
        row += [pred[c][i - band.start] if inside else None for c in names]
        rows.append(row)
    header = ["f_thz", "oracle_amp_x", "oracle_amp_y", "oracle_phase"] + [f"predicted_{c}" for c in names]
    target.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_bytes(target, _csv_text(header, rows).encode())
    print(f"wrote {target}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metascreen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="INI settings file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one setting (repeatable)")
        p.add_argument("--output-dir", help=f"output directory (default: ${OUTPUT_ENV} or .)")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    common(sub.add_parser("gen", help="generate a surrogate dataset"))
    common(sub.add_parser("train", help="cross-validated training of one model configuration"))
    p = sub.add_parser("experiment", help="run a study")
    common(p)
    p.add_argument("study", choices=STUDIES)
    p = sub.add_parser("export", help="oracle and predicted spectra for one pattern file")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--pattern", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--force", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            return cmd_export(args.checkpoint, args.pattern, args.output, args.force)
        settings = load_settings(args.config, args.set)
        out = output_dir(settings, args.output_dir)
        if args.command == "gen":
            return cmd_gen(settings, out, args.force)
        if args.command == "train":
            return cmd_train(settings, out, args.force)
        return cmd_experiment(settings, out, args.force, args.study)
    except (DomainError, OSError, KeyError, ValueError) as exc:
        print(f"metascreen {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
