from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._errors import DomainError


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: np.ndarray  # fold index per sample

    def test_indices(self, fold: int) -> np.ndarray:
        if not 0 <= fold < self.k:
            raise DomainError(f"fold {fold} outside [0, {self.k})")
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        if not 0 <= fold < self.k:
            raise DomainError(f"fold {fold} outside [0, {self.k})")
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> list[int]:
        return np.bincount(self.assignments, minlength=self.k).tolist()


def kfold(n: int, k: int = 5, seed: int = 0) -> FoldSplit:
    """Seeded permutation dealt round-robin into ``k`` folds."""
    if k < 2:
        raise DomainError(f"k must be at least 2, got {k}")
    if n < k:
        raise DomainError(f"cannot split {n} samples into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=np.int64)
    assignments[perm] = np.arange(n) % k
    return FoldSplit(k, assignments)
