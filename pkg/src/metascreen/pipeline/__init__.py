from .dataset import Dataset, generate_dataset, load_dataset, save_dataset
from .folds import FoldSplit, kfold
from .report import ExperimentReport, Summary
from .studies import (
    AsymmetryResult,
    run_asymmetry_experiment,
    run_asymmetry_study,
    run_augmentation_study,
    run_inverse_study,
)
from .training import ReportRow, TrainConfig, make_estimator, train_eval

__all__ = [
    "AsymmetryResult",
    "Dataset",
    "ExperimentReport",
    "FoldSplit",
    "ReportRow",
    "Summary",
    "TrainConfig",
    "generate_dataset",
    "kfold",
    "load_dataset",
    "make_estimator",
    "run_asymmetry_experiment",
    "run_asymmetry_study",
    "run_augmentation_study",
    "run_inverse_study",
    "save_dataset",
    "train_eval",
]
