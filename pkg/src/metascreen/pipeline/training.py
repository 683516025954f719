"""Cross-validated training of one model configuration."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .._errors import DomainError
from ..models.config import ModelConfig, other_band
from ..models.estimators import (
    BandTransferRegressor,
    ForwardSpectrumRegressor,
    InversePatternRegressor,
)
from .dataset import Dataset
from .folds import FoldSplit


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0:
            raise DomainError(f"epochs and batch_size must be positive, got {self.epochs}, {self.batch_size}")
        if self.learning_rate <= 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")


@dataclass
class ReportRow:
    family: str
    direction: str
    target: str
    supplement_band: str
    fold: int
    n_train: int
    n_test: int
    train_mse: float
    test_mse: float
    pixel_accuracy: float | None = None
    variant: str = ""
    wall_time: float = 0.0
    train_indices: np.ndarray | None = field(default=None, repr=False)
    test_indices: np.ndarray | None = field(default=None, repr=False)

    @property
    def key(self) -> tuple[str, str, str, str, str]:
        return (self.family, self.direction, self.target, self.supplement_band, self.variant)


_ESTIMATOR_FOR = {
    "forward": ForwardSpectrumRegressor,
    "inverse": InversePatternRegressor,
    "transfer": BandTransferRegressor,
}


def make_estimator(config: ModelConfig, tc: TrainConfig, init: str = "glorot", standardize: bool = True):
    params = config.to_dict()
    for drop in ("direction", "band_size"):
        params.pop(drop)
    params["spectrum_channels"] = tuple(params["spectrum_channels"])
    return _ESTIMATOR_FOR[config.direction](
        **params,
        epochs=tc.epochs,
        batch_size=tc.batch_size,
        learning_rate=tc.learning_rate,
        beta1=tc.beta1,
        beta2=tc.beta2,
        epsilon=tc.epsilon,
        shuffle_seed=tc.shuffle_seed,
        init=init,
        standardize=standardize,
    )


def direction_arrays(dataset: Dataset, config: ModelConfig):
    """(inputs, targets, supplement or None) for the whole dataset."""
    if config.band_size != dataset.band_size(config.band):
        raise DomainError(
            f"config band_size {config.band_size} does not match the dataset's "
            f"{dataset.band_size(config.band)} samples in the {config.band} band"
        )
    if config.direction == "forward":
        supp = None
        if config.supplement_band != "none":
            supp = dataset.channel(config.channel, config.supplement_band)
            if supp.shape[1] != config.band_size:
                raise DomainError("supplement band and target band differ in size")
        return dataset.grids, dataset.channel(config.channel, config.band), supp
    if config.direction == "inverse":
        return dataset.spectra(config.spectrum_channels, config.band), dataset.grids, None
    source = dataset.spectra(config.spectrum_channels, other_band(config.band))
    return source, dataset.spectra(config.spectrum_channels, config.band), None


def _take(arr, idx):
    return None if arr is None else arr[idx]


def _evaluate(est, X, y, supp):
    if isinstance(est, ForwardSpectrumRegressor):
        return est.mse(X, y, supp)
    return est.mse(X, y)


def run_fold(
    dataset, config, tc, split: FoldSplit, fold: int, init="glorot", standardize=True, frozen=False, variant=""
):
    """Train on every fold but ``fold`` and evaluate on it; returns (row, estimator)."""
    X, y, supp = direction_arrays(dataset, config)
    tr, te = split.train_indices(fold), split.test_indices(fold)
    est = make_estimator(config, tc, init, standardize)
    start = time.perf_counter()
    if frozen:
        est.set_params(epochs=0)
    if isinstance(est, ForwardSpectrumRegressor):
        est.fit(X[tr], y[tr], _take(supp, tr))
    else:
        est.fit(X[tr], y[tr])
    row = ReportRow(
        family=config.family,
        direction=config.direction,
        target=config.target,
        supplement_band=config.supplement_band,
        fold=fold,
        n_train=len(tr),
        n_test=len(te),
        train_mse=_evaluate(est, X[tr], y[tr], _take(supp, tr)),
        test_mse=_evaluate(est, X[te], y[te], _take(supp, te)),
        variant=variant,
        train_indices=tr,
        test_indices=te,
    )
    if config.direction == "inverse":
        row.pixel_accuracy = est.pixel_accuracy(X[te], y[te])
    row.wall_time = time.perf_counter() - start
    return row, est


def parallel_map(fn, jobs, n_jobs: int = 1):
    """Apply ``fn`` to argument tuples, in order; workers only when ``n_jobs > 1``."""
    if n_jobs <= 1:
        return [fn(*a) for a in jobs]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(*a) for a in jobs)


def train_eval(
    dataset: Dataset,
    config: ModelConfig,
    tc: TrainConfig,
    split: FoldSplit,
    *,
    init: str = "glorot",
    standardize: bool = True,
    frozen: bool = False,
    n_jobs: int = 1,
    return_models: bool = False,
    variant: str = "",
):
    """One report row per fold.  ``frozen`` skips all optimizer steps."""
    if len(dataset) == 0:
        raise DomainError("dataset is empty")
    if len(split.assignments) != len(dataset):
        raise DomainError(f"split covers {len(split.assignments)} samples, dataset has {len(dataset)}")
    direction_arrays(dataset, config)  # validate before any work
    jobs = [(dataset, config, tc, split, f, init, standardize, frozen, variant) for f in range(split.k)]
    results = parallel_map(run_fold, jobs, n_jobs)
    rows = [r for r, _ in results]
    if return_models:
        return rows, [m for _, m in results]
    return rows


def train_config_dict(tc: TrainConfig) -> dict:
    return asdict(tc)
