"""Analytic stand-in for full-wave simulation of a screen's THz transmission.

Each screen is mapped to a handful of Lorentzian resonances.  Ohmic damping of
the aluminium patches comes from the Drude permittivity through the surface
resistance ``Re(1/sqrt(eps))``.  A damping envelope and a noise floor that
both grow with frequency degrade the high band; setting ``alpha`` and
``eta0`` to zero removes that asymmetry.

Frequencies are in THz throughout, Drude parameters in rad/s.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from ._errors import DomainError
from .screen import PatternFeatures, PixelGrid, extract_features

BAND_EDGE_THZ = 1.0
BANDS = ("low", "high")

# Six resonance slots, one per contiguous group of columns.
_COLUMN_GROUPS = np.array_split(np.arange(25), 6)
_F0_LO, _F0_SPAN = 0.24, 1.52
_MAX_DETUNE = 0.02


@dataclass(frozen=True)
class FrequencyGrid:
    count: int = 1024
    f_min: float = 0.002
    f_max: float = 2.0

    def __post_init__(self):
        if self.count < 2:
            raise DomainError(f"count must be >= 2, got {self.count}")
        if not 0 < self.f_min < self.f_max:
            raise DomainError(f"need 0 < f_min < f_max, got {self.f_min}, {self.f_max}")

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.f_min, self.f_max, self.count)

    @property
    def step(self) -> float:
        return (self.f_max - self.f_min) / (self.count - 1)


@dataclass(frozen=True)
class DrudeParams:
    # aluminium
    omega_p: float = 2.24e16
    gamma: float = 1.22e14

    def __post_init__(self):
        if not (self.omega_p > 0 and self.gamma > 0):
            raise DomainError(f"omega_p and gamma must be positive, got {self.omega_p}, {self.gamma}")


@dataclass(frozen=True)
class OracleConfig:
    """Constants of the surrogate besides the frequency grid."""

    drude: DrudeParams = field(default_factory=DrudeParams)
    t0: float = 0.7
    alpha: float = 0.5
    eta0: float = 0.01
    tau: float = 4.0  # ps; 8 phase cycles over 0-2 THz
    ohmic_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.t0 <= 1:
            raise DomainError(f"t0 must lie in (0, 1], got {self.t0}")
        if self.alpha < 0 or self.eta0 < 0 or self.ohmic_scale < 0:
            raise DomainError("alpha, eta0 and ohmic_scale must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> OracleConfig:
        d = dict(d)
        d["drude"] = DrudeParams(**d.get("drude", {}))
        return cls(**d)


@dataclass(frozen=True)
class Resonator:
    f0: float
    q_factor: float
    strength: float
    cross_pol_fraction: float

    @property
    def width(self) -> float:
        return self.f0 / self.q_factor


@dataclass(frozen=True)
class SpectralResponse:
    amp_x: np.ndarray
    amp_y: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        n = len(self.amp_x)
        if len(self.amp_y) != n or len(self.phase) != n:
            raise DomainError("amp_x, amp_y and phase must have equal length")

    def __len__(self):
        return len(self.amp_x)

    def channel(self, name: str) -> np.ndarray:
        if name not in ("amp_x", "amp_y", "phase"):
            raise DomainError(f"unknown channel {name!r}")
        return getattr(self, name)

    def equals(self, other: SpectralResponse) -> bool:
        return all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in ("amp_x", "amp_y", "phase")
        )


def drude_permittivity(omega, params: DrudeParams):
    """Complex Drude permittivity at angular frequency ``omega`` (scalar or array)."""
    w = np.asarray(omega, dtype=np.float64)
    if np.any(w <= 0):
        raise DomainError("omega must be positive (imaginary part has a pole at 0)")
    wp2 = params.omega_p ** 2
    g = params.gamma
    denom = w * w + g * g
    eps = (1.0 - wp2 / denom) + 1j * (wp2 * g / (w * denom))
    return eps if eps.ndim else complex(eps)


def surface_resistance(f_thz, params: DrudeParams):
    """Normalised surface resistance Re(1/sqrt(eps)) of a Drude metal."""
    eps = drude_permittivity(2 * np.pi * np.asarray(f_thz) * 1e12, params)
    return np.real(1.0 / np.sqrt(eps))


def grid_digest(grid: PixelGrid) -> int:
    """Stable 64-bit hash of the grid's bit pattern."""
    packed = np.packbits(grid.cells.ravel()).tobytes()
    return int.from_bytes(hashlib.sha256(packed).digest()[:8], "little")


def _edge_density(cells: np.ndarray) -> float:
    # fraction of vertically adjacent pixel pairs that differ
    return float((cells[1:] != cells[:-1]).mean())


def derive_resonators(
    features: PatternFeatures, grid: PixelGrid, oracle: OracleConfig | None = None
) -> list[Resonator]:
    """Resonances of a screen, one per non-empty column group.

    Slot ``j`` sits at ``0.24 + 1.52 * (j + c_j) / 6`` THz where ``c_j`` is the
    metal fill of the group, so slots tile the 0.2-1.8 THz range symmetrically
    about the band edge.  A grid-seeded detuning and linewidth scale, shared by
    all resonances of the screen, adds structure that is not a smooth function
    of the pixels but is visible in both bands.
    """
    if features.fill_fraction == 0:
        return []
    oracle = oracle or OracleConfig()
    rng = np.random.default_rng(grid_digest(grid))
    detune = rng.uniform(-_MAX_DETUNE, _MAX_DETUNE)
    width_scale = rng.uniform(0.9, 1.1)
    strength = 0.3 + 0.6 * features.fill_fraction
    cross = features.mirror_asymmetry

    out = []
    for j, cols in enumerate(_COLUMN_GROUPS):
        c = float(features.column_fill[cols].mean())
        if c == 0:
            continue
        f0 = _F0_LO + _F0_SPAN * (j + c) / len(_COLUMN_GROUPS) + detune
        width = width_scale * (0.03 + 0.06 * _edge_density(grid.cells[:, cols]))
        width += oracle.ohmic_scale * f0 * float(surface_resistance(f0, oracle.drude))
        out.append(Resonator(f0=f0, q_factor=f0 / width, strength=strength, cross_pol_fraction=cross))
    return out


def _wrap(phase):
    return np.angle(np.exp(1j * phase))


def simulate(
    grid: PixelGrid,
    freq: FrequencyGrid | None = None,
    oracle: OracleConfig | None = None,
) -> SpectralResponse:
    freq = freq or FrequencyGrid()
    oracle = oracle or OracleConfig()
    f = freq.points
    features = extract_features(grid)
    resonators = derive_resonators(features, grid, oracle)

    envelope = np.exp(-oracle.alpha * f / freq.f_max)
    through = np.ones_like(f)
    converted = np.zeros_like(f)
    phase = -2 * np.pi * f * oracle.tau
    for r in resonators:
        detuning = (f - r.f0) / (0.5 * r.width)
        lorentz = 1.0 / (1.0 + detuning ** 2)
        through *= 1.0 - r.strength * (1.0 - r.cross_pol_fraction) * lorentz
        converted += r.strength * r.cross_pol_fraction * lorentz
        phase += r.strength * np.arctan(detuning)

    amp_x = np.clip(oracle.t0 * through * envelope, 0.0, 1.0)
    amp_y = np.clip(converted * envelope, 0.0, 1.0)

    floor = oracle.eta0 * f / freq.f_max
    noise = np.random.default_rng([grid_digest(grid), 1]).uniform(-1.0, 1.0, size=(3, f.size))
    amp_x = np.clip(amp_x + floor * noise[0], 0.0, 1.0)
    amp_y = np.clip(amp_y + floor * noise[1], 0.0, 1.0)
    phase = _wrap(phase + floor * noise[2])
    return SpectralResponse(amp_x=amp_x, amp_y=amp_y, phase=phase)


def band_indices(freq: FrequencyGrid, band: str) -> slice:
    """Contiguous sample range of a band.

    The 1 THz edge is snapped to the grid: a sample within half a step of the
    edge belongs to the low band, so the default 1024-point grid splits 512/512.
    """
    if band not in BANDS:
        raise DomainError(f"band must be one of {BANDS}, got {band!r}")
    f = freq.points
    n_low = int(np.count_nonzero(f <= BAND_EDGE_THZ + 0.5 * freq.step))
    sl = slice(0, n_low) if band == "low" else slice(n_low, freq.count)
    if sl.stop - sl.start <= 0:
        raise DomainError(f"{band} band contains no samples on {freq}")
    return sl


def band_slice(resp: SpectralResponse, freq: FrequencyGrid, band: str) -> SpectralResponse:
    if len(resp) != freq.count:
        raise DomainError(f"response has {len(resp)} samples, grid has {freq.count}")
    sl = band_indices(freq, band)
    return SpectralResponse(resp.amp_x[sl], resp.amp_y[sl], resp.phase[sl])


def response_to_csv(resp: SpectralResponse, freq: FrequencyGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["f_thz", "amp_x", "amp_y", "phase"])
    for row in zip(freq.points, resp.amp_x, resp.amp_y, resp.phase):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def response_from_csv(text: str) -> tuple[np.ndarray, SpectralResponse]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["f_thz", "amp_x", "amp_y", "phase"]:
        raise DomainError("expected header f_thz,amp_x,amp_y,phase")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, 4)
    return data[:, 0], SpectralResponse(data[:, 1], data[:, 2], data[:, 3])
