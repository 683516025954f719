"""The three experiment protocols: supplementary-band augmentation, band
asymmetry and inverse design.

Each study returns an :class:`ExperimentReport` plus plot data: a mapping
from file stem to rows of ``(f_thz, truth, prediction, band_role)``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .._errors import DomainError
from ..models.config import BANDS, CHANNELS, ModelConfig, other_band
from ..screen import N_PIXELS, SIDE
from ..surrogate import band_indices
from .dataset import Dataset
from .folds import FoldSplit, kfold
from .report import ExperimentReport
from .training import ReportRow, TrainConfig, direction_arrays, parallel_map, run_fold

PLOT_COLUMNS = ("f_thz", "truth", "prediction", "band_role")


def _config(dataset: Dataset, overrides: dict | None, **kw) -> ModelConfig:
    params = dict(overrides or {})
    params.update(kw)
    params["band_size"] = dataset.band_size(params.get("band", "low"))
    return ModelConfig(**params)


def _run_configs(dataset, configs, tc_for, split, n_jobs, variant_for=None):
    """Train every (config, fold) pair; returns rows and the fold-0 estimators."""
    jobs = []
    for i, cfg in enumerate(configs):
        variant = variant_for(i) if variant_for else ""
        for f in range(split.k):
            jobs.append((dataset, cfg, tc_for(i), split, f, "glorot", True, False, variant))
    results = parallel_map(run_fold, jobs, n_jobs)
    rows = [r for r, _ in results]
    first = {i: results[i * split.k][1] for i in range(len(configs))}
    return rows, first


def _freqs(dataset, band):
    return dataset.freq.points[band_indices(dataset.freq, band)]


def _plot_rows(dataset, band_role_values):
    rows = []
    for role, band, truth, pred in band_role_values:
        f = _freqs(dataset, band)
        for k in range(len(f)):
            rows.append((f[k], truth[k], None if pred is None else pred[k], role))
    return rows


def _split(dataset, split, split_seed):
    if split is None:
        return kfold(len(dataset), 5, split_seed)
    if len(split.assignments) != len(dataset):
        raise DomainError(f"split covers {len(split.assignments)} samples, dataset has {len(dataset)}")
    return split


def run_augmentation_study(
    dataset: Dataset,
    families,
    tc: TrainConfig,
    *,
    channels=CHANNELS,
    bands=BANDS,
    split: FoldSplit | None = None,
    split_seed: int = 0,
    model_overrides: dict | None = None,
    n_jobs: int = 1,
):
    """Baseline and opposite-band-augmented forward models on identical folds and seeds."""
    split = _split(dataset, split, split_seed)
    configs = []
    for family in families:
        for channel in channels:
            for band in bands:
                for supp in ("none", other_band(band)):
                    configs.append(
                        _config(dataset, model_overrides, family=family, direction="forward",
                                channel=channel, band=band, supplement_band=supp)
                    )
    rows, first = _run_configs(dataset, configs, lambda i: tc, split, n_jobs)
    report = ExperimentReport(rows)

    plots = {}
    sample = int(split.test_indices(0)[0])
    for i, cfg in enumerate(configs):
        X, y, supp = direction_arrays(dataset, cfg)
        est = first[i]
        s = None if supp is None else supp[sample:sample + 1]
        pred = est.predict(X[sample:sample + 1], s)[0]
        parts = []
        if supp is not None:
            parts.append(("supplement", cfg.supplement_band, supp[sample], None))
        parts.append(("target", cfg.band, y[sample], pred))
        plots[f"augmentation_{cfg.family}_{cfg.channel}_{cfg.band}_supp-{cfg.supplement_band}"] = _plot_rows(
            dataset, parts
        )
    return report, plots


@dataclass
class AsymmetryResult:
    mse_low_to_high: float
    mse_high_to_low: float
    ratio: float  # of the direction means
    repeat_low_to_high: list[float] = field(default_factory=list)
    repeat_high_to_low: list[float] = field(default_factory=list)

    @property
    def repeat_ratios(self) -> list[float]:
        return [h / l for l, h in zip(self.repeat_low_to_high, self.repeat_high_to_low)]

    @property
    def ratio_mean(self) -> float:
        return float(np.mean(self.repeat_ratios))

    @property
    def ratio_std(self) -> float:
        r = self.repeat_ratios
        return float(np.std(r, ddof=1)) if len(r) > 1 else 0.0


def run_asymmetry_experiment(
    dataset: Dataset,
    family: str,
    tc: TrainConfig,
    repeats: int,
    *,
    channels=("amp_x", "amp_y"),
    split: FoldSplit | None = None,
    split_seed: int = 0,
    model_overrides: dict | None = None,
    n_jobs: int = 1,
    variant: str = "",
):
    """Band-to-band predictors both ways; repeat ``r`` offsets the init and shuffle seeds by ``r``."""
    if repeats < 3:
        raise DomainError(f"repeats must be at least 3, got {repeats}")
    split = _split(dataset, split, split_seed)
    base_seed = int((model_overrides or {}).get("seed", 0))
    configs, tcs, variants = [], [], []
    for r in range(repeats):
        for target in ("high", "low"):
            configs.append(
                _config(dataset, model_overrides, family=family, direction="transfer", band=target,
                        spectrum_channels=tuple(channels), seed=base_seed + r)
            )
            tcs.append(dataclasses.replace(tc, shuffle_seed=tc.shuffle_seed + r))
            variants.append(f"{variant}repeat={r}")
    rows, first = _run_configs(dataset, configs, lambda i: tcs[i], split, n_jobs, lambda i: variants[i])

    def fold_mean(i):
        cfg = configs[i]
        return float(np.mean([
            row.test_mse for row in rows if row.key[2] == cfg.target and row.variant == variants[i]
        ]))

    l2h = [fold_mean(2 * r) for r in range(repeats)]
    h2l = [fold_mean(2 * r + 1) for r in range(repeats)]
    result = AsymmetryResult(float(np.mean(l2h)), float(np.mean(h2l)), float(np.mean(h2l) / np.mean(l2h)), l2h, h2l)

    plots = {}
    sample = int(split.test_indices(0)[0])
    for i in (0, 1):
        cfg = configs[i]
        X, y, _ = direction_arrays(dataset, cfg)
        pred = first[i].predict(X[sample:sample + 1])[0]
        for k, ch in enumerate(cfg.spectrum_channels):
            parts = [
                ("supplement", other_band(cfg.band), X[sample, :, k], None),
                ("target", cfg.band, y[sample, :, k], pred[:, k]),
            ]
            stem = f"asymmetry_{variant}{other_band(cfg.band)}_to_{cfg.band}_{ch}".replace("=", "-").replace(";", "_")
            plots[stem] = _plot_rows(dataset, parts)
    return ExperimentReport(rows), result, plots


def run_asymmetry_study(dataset: Dataset, family: str, tc: TrainConfig, repeats: int, **kw):
    """The asymmetry experiment with the damping mechanism on, then off (alpha = eta0 = 0)."""
    undamped = dataset.with_oracle(dataclasses.replace(dataset.oracle, alpha=0.0, eta0=0.0))
    report, on, plots = run_asymmetry_experiment(dataset, family, tc, repeats, variant="damping=on;", **kw)
    report_off, off, plots_off = run_asymmetry_experiment(
        undamped, family, tc, repeats, variant="damping=off;", **kw
    )
    report.add(report_off.rows)
    plots.update(plots_off)
    return report, {"on": on, "off": off}, plots


def constant_rows(dataset: Dataset, split: FoldSplit, band: str = "low") -> list[ReportRow]:
    """The constant 0.5 pixel predictor; its MSE on binary targets is exactly 0.25."""
    targets = dataset.grids.reshape(-1, N_PIXELS).astype(float)
    rows = []
    for f in range(split.k):
        tr, te = split.train_indices(f), split.test_indices(f)
        rows.append(ReportRow(
            family="constant-0.5", direction="inverse", target="pattern", supplement_band="none", fold=f,
            n_train=len(tr), n_test=len(te),
            train_mse=float(np.mean((targets[tr] - 0.5) ** 2)),
            test_mse=float(np.mean((targets[te] - 0.5) ** 2)),
            pixel_accuracy=float(np.mean(targets[te] == 1.0)),  # 0.5 thresholds to metal
            train_indices=tr, test_indices=te,
        ))
    return rows


def run_inverse_study(
    dataset: Dataset,
    families,
    tc: TrainConfig,
    *,
    band: str = "low",
    channels=CHANNELS,
    split: FoldSplit | None = None,
    split_seed: int = 0,
    model_overrides: dict | None = None,
    n_jobs: int = 1,
):
    """Spectra over ``band`` to patterns, reported next to the constant 0.5 predictor.

    Plot data holds, per pixel of one held-out pattern, the true cell and the
    predicted probability.
    """
    split = _split(dataset, split, split_seed)
    configs = [
        _config(dataset, model_overrides, family=f, direction="inverse", band=band,
                spectrum_channels=tuple(channels))
        for f in families
    ]
    rows, first = _run_configs(dataset, configs, lambda i: tc, split, n_jobs)
    report = ExperimentReport(rows + constant_rows(dataset, split, band))
    plots = {}
    sample = int(split.test_indices(0)[0])
    for i, cfg in enumerate(configs):
        X, y, _ = direction_arrays(dataset, cfg)
        prob = first[i].predict(X[sample:sample + 1])[0]
        truth = y[sample].reshape(-1)
        plots[f"inverse_{cfg.family}"] = [
            (r, c, int(truth[r * SIDE + c]), float(prob[r * SIDE + c])) for r in range(SIDE) for c in range(SIDE)
        ]
    return report, plots


INVERSE_PLOT_COLUMNS = ("row", "col", "truth", "probability")
