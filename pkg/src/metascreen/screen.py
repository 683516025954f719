"""Binary 25x25 metasurface screens and their 25-token column encoding.

A screen is a square unit cell of 25x25 pixels; a ``1`` pixel carries an
aluminium patch, a ``0`` pixel is bare substrate.  Column ``i`` of the grid is
packed into token ``i`` with row 0 as the least significant bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from ._errors import DomainError

SIDE = 25
N_PIXELS = SIDE * SIDE
TOKEN_LIMIT = 1 << SIDE

_BIT_WEIGHTS = np.left_shift(np.int64(1), np.arange(SIDE, dtype=np.int64))


@dataclass(frozen=True)
class UnitGeometry:
    """Physical dimensions of one unit cell (lengths in micrometres)."""

    period: float = 200.0
    pixel_side: float = 8.0
    metal_thickness: float = 0.2
    substrate_thickness: float = 500.0
    substrate_material: str = "high-resistance silicon"

    def __post_init__(self):
        for name in ("period", "pixel_side", "metal_thickness", "substrate_thickness"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.pixel_side * SIDE > self.period:
            raise DomainError(
                f"{SIDE} pixels of side {self.pixel_side} do not fit in period {self.period}"
            )


class PixelGrid:
    """Immutable 25x25 binary pattern."""

    __slots__ = ("_cells",)

    def __init__(self, cells):
        arr = np.asarray(cells)
        if arr.shape != (SIDE, SIDE):
            raise DomainError(f"grid must be {SIDE}x{SIDE}, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise DomainError("grid cells must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.setflags(write=False)
        object.__setattr__(self, "_cells", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PixelGrid is immutable")

    @property
    def cells(self) -> np.ndarray:
        return self._cells

    def mirror(self) -> PixelGrid:
        """Reflect about the vertical centerline (column i <-> column 24 - i)."""
        return PixelGrid(self._cells[:, ::-1])

    def __eq__(self, other):
        if not isinstance(other, PixelGrid):
            return NotImplemented
        return bool(np.array_equal(self._cells, other._cells))

    def __hash__(self):
        return hash(self._cells.tobytes())

    def __repr__(self):
        return f"PixelGrid(fill={self._cells.mean():.3f})"

    @classmethod
    def zeros(cls) -> PixelGrid:
        return cls(np.zeros((SIDE, SIDE), dtype=np.uint8))

    @classmethod
    def ones(cls) -> PixelGrid:
        return cls(np.ones((SIDE, SIDE), dtype=np.uint8))


@dataclass(frozen=True)
class PatternFeatures:
    fill_fraction: float
    column_fill: np.ndarray = field(repr=False)
    row_fill: np.ndarray = field(repr=False)
    mirror_asymmetry: float
    component_count: int


def random_pattern(seed: int, fill_prob: float) -> PixelGrid:
    """Draw a grid whose cells are independently 1 with probability ``fill_prob``."""
    if not 0.0 <= fill_prob <= 1.0:
        raise DomainError(f"fill_prob must lie in [0, 1], got {fill_prob}")
    rng = np.random.default_rng(seed)
    return PixelGrid(rng.random((SIDE, SIDE)) < fill_prob)


def to_tokens(grid: PixelGrid) -> tuple[int, ...]:
    packed = (grid.cells.astype(np.int64) * _BIT_WEIGHTS[:, None]).sum(axis=0)
    return tuple(int(t) for t in packed)


def from_tokens(tokens) -> PixelGrid:
    seq = list(tokens)
    if len(seq) != SIDE:
        raise DomainError(f"token sequence must have length {SIDE}, got {len(seq)}")
    for i, tok in enumerate(seq):
        if not 0 <= int(tok) < TOKEN_LIMIT:
            raise DomainError(f"token {i} = {tok} outside [0, 2**{SIDE})")
    arr = np.asarray(seq, dtype=np.int64)
    cells = (arr[None, :] >> np.arange(SIDE, dtype=np.int64)[:, None]) & 1
    return PixelGrid(cells)


def token_bits(cells: np.ndarray) -> np.ndarray:
    """Batch of grids (n, 25, 25) -> batch of token bit-vectors (n, 25 tokens, 25 bits).

    Token ``i`` is column ``i``; bit ``r`` of the vector is row ``r``.
    """
    return np.swapaxes(np.asarray(cells), -1, -2)


def extract_features(grid: PixelGrid) -> PatternFeatures:
    cells = grid.cells
    _, n_components = ndimage.label(cells)
    return PatternFeatures(
        fill_fraction=float(cells.mean()),
        column_fill=cells.mean(axis=0),
        row_fill=cells.mean(axis=1),
        mirror_asymmetry=float((cells != cells[:, ::-1]).mean()),
        component_count=int(n_components),
    )


# -- text format -----------------------------------------------------------

def format_grid(grid: PixelGrid) -> str:
    return "".join("".join(str(v) for v in row) + "\n" for row in grid.cells)


def parse_grid(text: str) -> PixelGrid:
    lines = text.splitlines()
    rows = []
    for lineno in range(1, SIDE + 1):
        if lineno > len(lines):
            raise DomainError(f"line {lineno}: missing (expected {SIDE} lines, got {len(lines)})")
        line = lines[lineno - 1].rstrip("\r")
        if len(line) != SIDE or set(line) - {"0", "1"}:
            raise DomainError(f"line {lineno}: expected {SIDE} characters of '0'/'1', got {line!r}")
        rows.append([int(ch) for ch in line])
    extra = [ln for ln in lines[SIDE:] if ln.strip()]
    if extra:
        raise DomainError(f"line {SIDE + 1}: unexpected content after {SIDE} rows")
    return PixelGrid(rows)


def read_grid(path) -> PixelGrid:
    return parse_grid(Path(path).read_text())


def write_grid(grid: PixelGrid, path) -> None:
    Path(path).write_text(format_grid(grid))
