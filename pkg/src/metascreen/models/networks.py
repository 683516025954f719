"""The four network families wired for forward, inverse and band-transfer use."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._errors import DomainError
from ..autograd import ops
from ..autograd.init import glorot_uniform, recurrent_uniform
from ..autograd.tensor import Tensor, no_grad
from ..screen import N_PIXELS, SIDE, token_bits
from .config import ModelConfig, channel_width
from .layers import gru_layer, lstm_layer, self_attention, sinusoidal_positions

_CNN_BASE_CHANNELS = 8
_SPECTRUM_KERNEL = 7
_SPECTRUM_POOL = 4
_PROB_EPS = 1e-12


# -- spectral channel encoding ---------------------------------------------

def encode_channels(values: np.ndarray, channels) -> np.ndarray:
    """(n, L, len(channels)) physical values -> (n, L, internal width)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 2:
        values = values[..., None]
    if values.shape[-1] != len(channels):
        raise DomainError(f"expected {len(channels)} channels {tuple(channels)}, got shape {values.shape}")
    parts = []
    for k, ch in enumerate(channels):
        v = values[..., k]
        parts.extend([np.sin(v), np.cos(v)] if ch == "phase" else [v])
    return np.stack(parts, axis=-1)


def decode_channels(internal: np.ndarray, channels) -> np.ndarray:
    """Inverse of :func:`encode_channels`; phase comes back wrapped to [-pi, pi]."""
    out, k = [], 0
    for ch in channels:
        if ch == "phase":
            out.append(np.arctan2(internal[..., k], internal[..., k + 1]))
            k += 2
        else:
            out.append(internal[..., k])
            k += 1
    return np.stack(out, axis=-1)


# -- batches ---------------------------------------------------------------

@dataclass
class ForwardBatch:
    pattern_input: np.ndarray
    supplement_input: np.ndarray | None = None
    target_output: np.ndarray | None = None


@dataclass
class InverseBatch:
    spectrum_input: np.ndarray
    target_pattern: np.ndarray | None = None


@dataclass
class TransferBatch:
    spectrum_input: np.ndarray
    target_output: np.ndarray | None = None


def pattern_input(grids: np.ndarray, input_mode: str) -> np.ndarray:
    grids = np.asarray(grids, dtype=np.float64)
    if grids.ndim != 3 or grids.shape[1:] != (SIDE, SIDE):
        raise DomainError(f"patterns must be (n, {SIDE}, {SIDE}), got {grids.shape}")
    return grids[:, None] if input_mode == "image" else token_bits(grids)


# -- model -----------------------------------------------------------------

class Model:
    """Parameters plus the forward graph for one :class:`ModelConfig`.

    ``forward`` returns outputs in the network's internal units: standardised
    spectra of shape (batch, band_size, width) or pixel probabilities of shape
    (batch, 625).  :func:`predict` maps them back to physical values.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}
        cfg = config
        hid = cfg.hidden_size
        if cfg.direction == "forward":
            self.out_width = channel_width(cfg.channel)
            self.in_width = None
            if cfg.input_mode == "image":
                self._build_cnn_image("enc")
            else:
                self._build_sequence("enc", SIDE)
        else:
            self.in_width = sum(channel_width(c) for c in cfg.spectrum_channels)
            self.out_width = self.in_width
            if cfg.family == "cnn":
                self._build_cnn_spectrum("enc", self.in_width)
            else:
                self._build_sequence("enc", cfg.patch * self.in_width)
            self._norm("in", self.in_width)

        n_out = N_PIXELS if cfg.direction == "inverse" else cfg.band_size * self.out_width
        self._dense("head.w_main", hid, n_out)
        if cfg.supplement_band != "none":
            width = channel_width(cfg.channel)
            self._dense("supp.w", cfg.band_size * width, hid)
            self._zeros("supp.b", hid)
            self._dense("head.w_supp", hid, n_out)
            self._norm("supp", width)
        self._zeros("head.b", n_out)
        if cfg.direction != "inverse":
            self.buffers["out.mean"] = np.zeros((cfg.band_size, self.out_width))
            self.buffers["out.scale"] = np.ones(1)

    # parameter helpers
    def _add(self, name, data):
        self.params[name] = Tensor(data, requires_grad=True, name=name)

    def _dense(self, name, fan_in, fan_out):
        self._add(name, glorot_uniform(self.config.seed, name, (fan_in, fan_out), fan_in, fan_out))

    def _zeros(self, name, *shape):
        self._add(name, np.zeros(shape))

    def _norm(self, name, width):
        self.buffers[f"{name}.mean"] = np.zeros(width)
        self.buffers[f"{name}.std"] = np.ones(width)

    def _conv(self, name, c_in, c_out, kh, kw):
        shape = (c_out, c_in, kh, kw)
        self._add(name, glorot_uniform(self.config.seed, name, shape, c_in * kh * kw, c_out * kh * kw))

    def _build_cnn_image(self, p):
        c_in, side = 1, SIDE
        for i in range(self.config.depth):
            c_out = _CNN_BASE_CHANNELS << i
            self._conv(f"{p}.conv{i}.w", c_in, c_out, 3, 3)
            self._zeros(f"{p}.conv{i}.b", c_out)
            c_in, side = c_out, side // 2
        self._dense(f"{p}.fc.w", c_in * side * side, self.config.hidden_size)
        self._zeros(f"{p}.fc.b", self.config.hidden_size)

    def _build_cnn_spectrum(self, p, width):
        c_in, length = width, self.config.band_size
        for i in range(self.config.depth):
            c_out = _CNN_BASE_CHANNELS << i
            self._conv(f"{p}.conv{i}.w", c_in, c_out, 1, _SPECTRUM_KERNEL)
            self._zeros(f"{p}.conv{i}.b", c_out)
            c_in, length = c_out, length // _SPECTRUM_POOL
        self._dense(f"{p}.fc.w", c_in * length, self.config.hidden_size)
        self._zeros(f"{p}.fc.b", self.config.hidden_size)

    def _build_sequence(self, p, feat):
        cfg, hid, seed = self.config, self.config.hidden_size, self.config.seed
        self._dense(f"{p}.emb.w", feat, hid)
        self._zeros(f"{p}.emb.b", hid)
        for layer in range(cfg.depth):
            q = f"{p}.l{layer}"
            if cfg.family == "lstm":
                self._add(f"{q}.wx", recurrent_uniform(seed, f"{q}.wx", (hid, 4 * hid), hid))
                self._add(f"{q}.wh", recurrent_uniform(seed, f"{q}.wh", (hid, 4 * hid), hid))
                self._zeros(f"{q}.b", 4 * hid)
            elif cfg.family == "gru":
                self._add(f"{q}.wx", recurrent_uniform(seed, f"{q}.wx", (hid, 3 * hid), hid))
                self._add(f"{q}.wh", recurrent_uniform(seed, f"{q}.wh", (hid, 3 * hid), hid))
                self._zeros(f"{q}.bx", 3 * hid)
                self._zeros(f"{q}.bh", 3 * hid)
            else:
                for ln in ("ln1", "ln2"):
                    self._add(f"{q}.{ln}.g", np.ones(hid))
                    self._zeros(f"{q}.{ln}.b", hid)
                self._dense(f"{q}.attn.w", hid, hid)
                self._zeros(f"{q}.attn.b", hid)
                self._dense(f"{q}.ff1.w", hid, 2 * hid)
                self._zeros(f"{q}.ff1.b", 2 * hid)
                self._dense(f"{q}.ff2.w", 2 * hid, hid)
                self._zeros(f"{q}.ff2.b", hid)
        if cfg.family == "transformer":
            self._add(f"{p}.lnf.g", np.ones(hid))
            self._zeros(f"{p}.lnf.b", hid)

    # graph pieces
    def _cnn(self, x, p, kernel, pad, pool):
        P = self.params
        for i in range(self.config.depth):
            x = ops.conv2d(x, P[f"{p}.conv{i}.w"], padding=pad)
            x = ops.relu(ops.add(x, ops.reshape(P[f"{p}.conv{i}.b"], (1, -1, 1, 1))))
            x = ops.max_pool2d(x, pool)
        x = ops.reshape(x, (x.shape[0], -1))
        return ops.relu(ops.linear(x, P[f"{p}.fc.w"], P[f"{p}.fc.b"]))

    def _ln(self, x, p):
        return ops.add(ops.mul(ops.layer_norm(x), self.params[f"{p}.g"]), self.params[f"{p}.b"])

    def _sequence(self, seq, p):
        cfg, P = self.config, self.params
        steps = seq.shape[1]
        h = ops.linear(seq, P[f"{p}.emb.w"], P[f"{p}.emb.b"])
        if cfg.family == "transformer":
            h = ops.add(h, sinusoidal_positions(steps, cfg.hidden_size))
            for layer in range(cfg.depth):
                q = f"{p}.l{layer}"
                a = self_attention(self._ln(h, f"{q}.ln1"), cfg.attention_heads, P[f"{q}.attn.w"], P[f"{q}.attn.b"])
                h = ops.add(h, a)
                f = ops.relu(ops.linear(self._ln(h, f"{q}.ln2"), P[f"{q}.ff1.w"], P[f"{q}.ff1.b"]))
                h = ops.add(h, ops.linear(f, P[f"{q}.ff2.w"], P[f"{q}.ff2.b"]))
            return ops.mean(self._ln(h, f"{p}.lnf"), axis=1)

        for layer in range(cfg.depth):
            q = f"{p}.l{layer}"
            if cfg.family == "lstm":
                h = lstm_layer(h, P[f"{q}.wx"], P[f"{q}.wh"], P[f"{q}.b"])
            else:
                h = gru_layer(h, P[f"{q}.wx"], P[f"{q}.wh"], P[f"{q}.bx"], P[f"{q}.bh"])
        return h[:, -1]

    def _encode_spectrum(self, spec):
        cfg = self.config
        if cfg.family == "cnn":
            x = np.ascontiguousarray(spec.transpose(0, 2, 1)[:, :, None, :])
            return self._cnn(x, "enc", (1, _SPECTRUM_KERNEL), (0, _SPECTRUM_KERNEL // 2), (1, _SPECTRUM_POOL))
        bsz, length, width = spec.shape
        return self._sequence(spec.reshape(bsz, length // cfg.patch, cfg.patch * width), "enc")

    def _normalise(self, spec, name):
        return (spec - self.buffers[f"{name}.mean"]) / self.buffers[f"{name}.std"]

    def forward(self, batch) -> Tensor:
        cfg, P = self.config, self.params
        self._check_batch(batch)
        if cfg.direction == "forward":
            x = batch.pattern_input
            z = self._cnn(x, "enc", 3, 1, 2) if cfg.input_mode == "image" else self._sequence(x, "enc")
        else:
            z = self._encode_spectrum(self._normalise(batch.spectrum_input, "in"))
        reps, blocks = [z], [P["head.w_main"]]
        if cfg.supplement_band != "none":
            s = self._normalise(batch.supplement_input, "supp").reshape(len(batch.supplement_input), -1)
            reps.append(ops.relu(ops.linear(s, P["supp.w"], P["supp.b"])))
            blocks.append(P["head.w_supp"])
        if len(reps) > 1:
            out = ops.linear(ops.concat(reps, axis=1), ops.concat(blocks, axis=0), P["head.b"])
        else:
            out = ops.linear(z, P["head.w_main"], P["head.b"])
        if cfg.direction == "inverse":
            return ops.sigmoid(out)
        return ops.reshape(out, (out.shape[0], cfg.band_size, self.out_width))

    def _check_batch(self, batch):
        cfg = self.config
        want = {"forward": ForwardBatch, "inverse": InverseBatch, "transfer": TransferBatch}[cfg.direction]
        if not isinstance(batch, want):
            raise DomainError(f"{cfg.direction} model needs a {want.__name__}, got {type(batch).__name__}")
        if cfg.direction == "forward":
            shape = batch.pattern_input.shape[1:]
            expected = (1, SIDE, SIDE) if cfg.input_mode == "image" else (SIDE, SIDE)
            if shape != expected:
                raise DomainError(f"{cfg.input_mode} input must be (batch, {expected}), got {batch.pattern_input.shape}")
            has_supp = batch.supplement_input is not None
            if has_supp != (cfg.supplement_band != "none"):
                raise DomainError(
                    f"supplement_band={cfg.supplement_band!r} but supplement input {'given' if has_supp else 'missing'}"
                )
            if has_supp and batch.supplement_input.shape[1:] != (cfg.band_size, channel_width(cfg.channel)):
                raise DomainError(f"supplement input has shape {batch.supplement_input.shape}")
        else:
            expected = (cfg.band_size, self.in_width)
            if batch.spectrum_input.shape[1:] != expected:
                raise DomainError(f"spectrum input must be (batch, {expected}), got {batch.spectrum_input.shape}")

    # state
    def parameters(self) -> list[Tensor]:
        return [self.params[k] for k in sorted(self.params)]

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {f"param:{k}": v.data for k, v in self.params.items()}
        state.update({f"buffer:{k}": v for k, v in self.buffers.items()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        expected = set(self.state_dict())
        if set(state) != expected:
            missing, extra = expected - set(state), set(state) - expected
            raise DomainError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for key, arr in state.items():
            kind, name = key.split(":", 1)
            target = self.params[name].data if kind == "param" else self.buffers[name]
            if target.shape != arr.shape:
                raise DomainError(f"{key}: shape {arr.shape} != {target.shape}")
            if kind == "param":
                self.params[name].data = np.array(arr, dtype=np.float64)
            else:
                self.buffers[name] = np.array(arr, dtype=np.float64)


def build_model(config: ModelConfig) -> Model:
    return Model(config)


def predict(model: Model, batch) -> np.ndarray:
    """Physical-unit prediction; never mutates the model.

    forward: (batch, band_size) values of the target channel (phase wrapped);
    inverse: (batch, 625) pixel probabilities; transfer: (batch, band_size,
    n_channels).
    """
    cfg = model.config
    with no_grad():
        raw = model.forward(batch).data
    if cfg.direction == "inverse":
        # keep probabilities strictly inside (0, 1) even for saturated logits
        return np.clip(raw, _PROB_EPS, 1.0 - _PROB_EPS)
    internal = raw * model.buffers["out.scale"] + model.buffers["out.mean"]
    if cfg.direction == "forward":
        return decode_channels(internal, (cfg.channel,))[..., 0]
    return decode_channels(internal, cfg.spectrum_channels)
