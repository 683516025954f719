"""Per-fold metrics, aggregates and their CSV serialization.

Wall time lives in a separate timing file so that report files are
byte-identical across reruns.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .._errors import DomainError
from .training import ReportRow

THRESHOLD = 0.85

ROW_COLUMNS = (
    "family", "direction", "target", "supplement_band", "variant", "fold", "n_train", "n_test",
    "train_mse", "test_mse", "reduction_percent", "pixel_accuracy",
)
SUMMARY_COLUMNS = (
    "family", "direction", "target", "supplement_band", "variant", "folds", "test_mse_mean", "test_mse_std",
    "reduction_percent", "folds_improved", "below_threshold",
)
_DIRECTION_ORDER = {"forward": 0, "inverse": 1, "transfer": 2}
_SUPP_ORDER = {"none": 0, "low": 1, "high": 2}


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _sort_key(key):
    family, direction, target, supp, variant = key
    return (variant, _DIRECTION_ORDER.get(direction, 9), family, target, _SUPP_ORDER.get(supp, 9), supp)


@dataclass
class Summary:
    key: tuple[str, str, str, str, str]
    folds: int
    mean: float
    std: float
    reduction_percent: float | None = None
    folds_improved: int | None = None

    @property
    def below_threshold(self) -> bool | None:
        if self.reduction_percent is None:
            return None
        return (1.0 - self.reduction_percent / 100.0) < THRESHOLD


@dataclass
class ExperimentReport:
    rows: list[ReportRow] = field(default_factory=list)

    def add(self, rows) -> None:
        self.rows.extend(rows)

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(self.rows, key=lambda r: (_sort_key(r.key), r.fold))

    def _by_key(self) -> dict:
        groups: dict = {}
        for r in self.sorted_rows():
            groups.setdefault(r.key, {})
            if r.fold in groups[r.key]:
                raise DomainError(f"duplicate row for {r.key} fold {r.fold}")
            groups[r.key][r.fold] = r
        return groups

    @staticmethod
    def baseline_key(key):
        return key[:3] + ("none", key[4])

    def fold_reduction(self, row: ReportRow) -> float | None:
        """100 * (1 - aug / base) against the baseline on the same fold."""
        if row.supplement_band == "none":
            return None
        base = self._by_key().get(self.baseline_key(row.key), {}).get(row.fold)
        if base is None:
            return None
        return 100.0 * (1.0 - row.test_mse / base.test_mse)

    def aggregate(self) -> dict:
        groups = self._by_key()
        out = {}
        for key, folds in groups.items():
            mses = np.array([folds[f].test_mse for f in sorted(folds)])
            std = float(mses.std(ddof=1)) if len(mses) > 1 else 0.0
            out[key] = Summary(key, len(mses), float(mses.mean()), std)
        for key, s in out.items():
            base = out.get(self.baseline_key(key))
            if key[3] == "none" or base is None:
                continue
            s.reduction_percent = 100.0 * (1.0 - s.mean / base.mean)
            base_folds = groups[self.baseline_key(key)]
            s.folds_improved = sum(
                1 for f, r in groups[key].items() if f in base_folds and r.test_mse < base_folds[f].test_mse
            )
        return {k: out[k] for k in sorted(out, key=_sort_key)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ROW_COLUMNS)
        for r in self.sorted_rows():
            w.writerow([
                *r.key, r.fold, r.n_train, r.n_test,
                _num(r.train_mse), _num(r.test_mse), _num(self.fold_reduction(r)), _num(r.pixel_accuracy),
            ])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in self.aggregate().values():
            below = s.below_threshold
            w.writerow([
                *s.key, s.folds, _num(s.mean), _num(s.std), _num(s.reduction_percent),
                "" if s.folds_improved is None else s.folds_improved,
                "" if below is None else int(below),
            ])
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("family", "direction", "target", "supplement_band", "variant", "fold", "wall_time_s"))
        for r in self.sorted_rows():
            w.writerow([*r.key, r.fold, f"{r.wall_time:.3f}"])
        return buf.getvalue()


def read_report_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
