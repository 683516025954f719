"""Surrogate-generated datasets and their binary container.

Container layout (little-endian)::

    magic b"MSDS", u16 version
    u32 n, u32 frequency count, f64 f_min, f64 f_max
    f64 omega_p, gamma, t0, alpha, eta0, tau, ohmic_scale
    i64 generation seed, f64 fill_lo, f64 fill_hi
    n records: 79 bytes of packed pattern bits, then amp_x, amp_y, phase
    as float64 arrays of the frequency count
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .._errors import DomainError
from ..autograd.checkpoint import atomic_write_bytes
from ..screen import N_PIXELS, SIDE, PixelGrid, random_pattern
from ..surrogate import (
    DrudeParams,
    FrequencyGrid,
    OracleConfig,
    SpectralResponse,
    band_indices,
    simulate,
)

MAGIC = b"MSDS"
VERSION = 1
_HEADER = struct.Struct("<4sHIIdd7dqdd")
_PACKED = (N_PIXELS + 7) // 8


@dataclass
class Dataset:
    grids: np.ndarray  # (n, 25, 25) uint8
    amp_x: np.ndarray  # (n, count)
    amp_y: np.ndarray
    phase: np.ndarray
    freq: FrequencyGrid = field(default_factory=FrequencyGrid)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    generation_seed: int = 0
    fill_prob_range: tuple[float, float] = (0.2, 0.8)

    def __len__(self):
        return len(self.grids)

    def __getitem__(self, i) -> tuple[PixelGrid, SpectralResponse]:
        return PixelGrid(self.grids[i]), SpectralResponse(self.amp_x[i], self.amp_y[i], self.phase[i])

    @property
    def samples(self) -> list[tuple[PixelGrid, SpectralResponse]]:
        return [self[i] for i in range(len(self))]

    def channel(self, name: str, band: str | None = None) -> np.ndarray:
        if name not in ("amp_x", "amp_y", "phase"):
            raise DomainError(f"unknown channel {name!r}")
        arr = getattr(self, name)
        return arr if band is None else arr[:, band_indices(self.freq, band)]

    def spectra(self, channels, band: str) -> np.ndarray:
        """(n, band samples, len(channels)) stacked physical values."""
        return np.stack([self.channel(c, band) for c in channels], axis=-1)

    def band_size(self, band: str) -> int:
        sl = band_indices(self.freq, band)
        return sl.stop - sl.start

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(
            self.grids[idx], self.amp_x[idx], self.amp_y[idx], self.phase[idx],
            self.freq, self.oracle, self.generation_seed, self.fill_prob_range,
        )

    def with_oracle(self, oracle: OracleConfig) -> Dataset:
        """Same patterns re-simulated under different oracle constants."""
        return _simulate_all(self.grids, self.freq, oracle, self.generation_seed, self.fill_prob_range)

    def verify(self) -> list[int]:
        """Indices whose stored spectra differ from a fresh simulation."""
        bad = []
        for i in range(len(self)):
            fresh = simulate(PixelGrid(self.grids[i]), self.freq, self.oracle)
            _, stored = self[i]
            if not fresh.equals(stored):
                bad.append(i)
        return bad


def _simulate_all(grids, freq, oracle, seed, fill_range) -> Dataset:
    n = len(grids)
    amp_x, amp_y, phase = (np.empty((n, freq.count)) for _ in range(3))
    for i, cells in enumerate(grids):
        r = simulate(PixelGrid(cells), freq, oracle)
        amp_x[i], amp_y[i], phase[i] = r.amp_x, r.amp_y, r.phase
    return Dataset(np.asarray(grids, dtype=np.uint8), amp_x, amp_y, phase, freq, oracle, seed, tuple(fill_range))


def generate_dataset(
    n: int,
    seed: int,
    fill_prob_range=(0.2, 0.8),
    freq: FrequencyGrid | None = None,
    oracle: OracleConfig | None = None,
) -> Dataset:
    """Sample ``n`` screens with per-screen fill probability uniform in the range."""
    lo, hi = (float(v) for v in fill_prob_range)
    if n < 10:
        raise DomainError(f"need at least 10 samples, got {n}")
    if not 0.0 <= lo <= hi <= 1.0:
        raise DomainError(f"fill_prob_range must satisfy 0 <= lo <= hi <= 1, got {fill_prob_range}")
    freq = freq or FrequencyGrid()
    oracle = oracle or OracleConfig()
    rng = np.random.default_rng(seed)
    probs = rng.uniform(lo, hi, size=n)
    pattern_seeds = rng.integers(0, 2**63 - 1, size=n)
    grids = np.stack([random_pattern(int(s), float(p)).cells for s, p in zip(pattern_seeds, probs)])
    return _simulate_all(grids, freq, oracle, seed, (lo, hi))


def dumps_dataset(ds: Dataset) -> bytes:
    o, d = ds.oracle, ds.oracle.drude
    header = _HEADER.pack(
        MAGIC, VERSION, len(ds), ds.freq.count, ds.freq.f_min, ds.freq.f_max,
        d.omega_p, d.gamma, o.t0, o.alpha, o.eta0, o.tau, o.ohmic_scale,
        ds.generation_seed, *ds.fill_prob_range,
    )
    parts = [header]
    for i in range(len(ds)):
        parts.append(np.packbits(ds.grids[i].ravel()).tobytes())
        for arr in (ds.amp_x[i], ds.amp_y[i], ds.phase[i]):
            parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def loads_dataset(blob: bytes) -> Dataset:
    if len(blob) < _HEADER.size or blob[:4] != MAGIC:
        raise DomainError("not a dataset file (bad magic)")
    (_, version, n, count, f_min, f_max, omega_p, gamma, t0, alpha, eta0, tau, ohmic,
     seed, lo, hi) = _HEADER.unpack_from(blob)
    if version != VERSION:
        raise DomainError(f"unsupported dataset version {version}")
    record = _PACKED + 3 * 8 * count
    if len(blob) != _HEADER.size + n * record:
        raise DomainError(f"dataset size mismatch: expected {n} records of {record} bytes")
    freq = FrequencyGrid(count, f_min, f_max)
    oracle = OracleConfig(DrudeParams(omega_p, gamma), t0, alpha, eta0, tau, ohmic)
    grids = np.empty((n, SIDE, SIDE), dtype=np.uint8)
    arrays = np.empty((3, n, count))
    pos = _HEADER.size
    for i in range(n):
        bits = np.frombuffer(blob, dtype=np.uint8, count=_PACKED, offset=pos)
        grids[i] = np.unpackbits(bits)[:N_PIXELS].reshape(SIDE, SIDE)
        pos += _PACKED
        arrays[:, i] = np.frombuffer(blob, dtype="<f8", count=3 * count, offset=pos).reshape(3, count)
        pos += 3 * 8 * count
    return Dataset(grids, arrays[0], arrays[1], arrays[2], freq, oracle, seed, (lo, hi))


def save_dataset(ds: Dataset, path) -> str:
    """Write atomically; returns the SHA-256 of the file contents."""
    blob = dumps_dataset(ds)
    atomic_write_bytes(path, blob)
    return hashlib.sha256(blob).hexdigest()


def load_dataset(path) -> Dataset:
    return loads_dataset(Path(path).read_bytes())
