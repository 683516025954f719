from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .._errors import DomainError

FAMILIES = ("cnn", "lstm", "gru", "transformer")
DIRECTIONS = ("forward", "inverse", "transfer")
CHANNELS = ("amp_x", "amp_y", "phase")
BANDS = ("low", "high")
SUPPLEMENTS = ("none",) + BANDS


def channel_width(channel: str) -> int:
    """Internal width of a spectral channel; phase travels as (sin, cos)."""
    return 2 if channel == "phase" else 1


def other_band(band: str) -> str:
    return "high" if band == "low" else "low"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture of one network.

    ``band`` and ``channel`` read by direction:

    * forward: predict ``channel`` over ``band`` from the pattern, optionally
      helped by the same channel over ``supplement_band``;
    * inverse: predict the pattern from ``spectrum_channels`` over ``band``;
    * transfer: predict ``spectrum_channels`` over ``band`` from the same
      channels over the other band.
    """

    family: str = "cnn"
    direction: str = "forward"
    input_mode: str | None = None
    hidden_size: int = 128
    depth: int = 2
    attention_heads: int = 4
    supplement_band: str = "none"
    channel: str = "amp_x"
    band: str = "low"
    spectrum_channels: tuple[str, ...] = field(default=CHANNELS)
    band_size: int = 512
    patch: int = 16
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "spectrum_channels", tuple(self.spectrum_channels))
        if self.input_mode is None:
            if self.direction == "forward":
                mode = "image" if self.family == "cnn" else "tokens"
            else:
                mode = "spectrum"
            object.__setattr__(self, "input_mode", mode)
        self.validate()

    def validate(self) -> None:
        def choice(name, allowed):
            if getattr(self, name) not in allowed:
                raise DomainError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")

        choice("family", FAMILIES)
        choice("direction", DIRECTIONS)
        choice("supplement_band", SUPPLEMENTS)
        choice("channel", CHANNELS)
        choice("band", BANDS)
        for c in self.spectrum_channels:
            if c not in CHANNELS:
                raise DomainError(f"unknown spectrum channel {c!r}")
        if not self.spectrum_channels:
            raise DomainError("spectrum_channels must not be empty")
        for name in ("hidden_size", "depth", "attention_heads", "band_size", "patch"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")
        if self.family == "transformer" and self.hidden_size % self.attention_heads:
            raise DomainError(
                f"hidden_size {self.hidden_size} not divisible by {self.attention_heads} attention heads"
            )
        if self.direction == "forward":
            if self.input_mode == "image" and self.family != "cnn":
                raise DomainError("image input requires the cnn family")
            if self.input_mode == "tokens" and self.family == "cnn":
                raise DomainError("token input requires lstm, gru or transformer")
            if self.input_mode not in ("image", "tokens"):
                raise DomainError(f"forward input_mode must be image or tokens, got {self.input_mode!r}")
            if self.supplement_band == self.band:
                raise DomainError(
                    f"supplement band {self.supplement_band!r} must differ from target band {self.band!r}"
                )
            if self.family == "cnn" and 25 >> self.depth < 1:
                raise DomainError(f"cnn depth {self.depth} pools a 25x25 image to nothing")
        else:
            if self.input_mode != "spectrum":
                raise DomainError(f"{self.direction} models take spectrum input, got {self.input_mode!r}")
            if self.supplement_band != "none":
                raise DomainError("supplementary input applies to forward models only")
            if self.family == "cnn" and self.band_size >> (2 * self.depth) < 1:
                raise DomainError(f"cnn depth {self.depth} pools {self.band_size} samples to nothing")
            if self.family != "cnn" and self.band_size % self.patch:
                raise DomainError(f"band_size {self.band_size} not divisible by patch {self.patch}")

    @property
    def target(self) -> str:
        if self.direction == "inverse":
            return "pattern"
        if self.direction == "transfer":
            return f"{'+'.join(self.spectrum_channels)}:{self.band}"
        return f"{self.channel}:{self.band}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spectrum_channels"] = list(self.spectrum_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        return cls(**d)
