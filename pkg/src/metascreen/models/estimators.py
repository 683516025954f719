"""scikit-learn style wrappers that own training of a :class:`Model`."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._errors import DomainError
from ..autograd import ops
from ..autograd.checkpoint import load_checkpoint, save_checkpoint
from ..autograd.optim import Adam
from ..autograd.tensor import Tape, backward, no_grad
from ..screen import N_PIXELS, SIDE, PixelGrid
from .config import ModelConfig
from .networks import (
    ForwardBatch,
    InverseBatch,
    TransferBatch,
    build_model,
    encode_channels,
    pattern_input,
    predict,
)

_EVAL_BATCH = 64


def wrapped_difference(a, b):
    return np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b))))


def spectral_mse(pred, truth, channels) -> float:
    """MSE in physical units; phase errors are taken modulo 2*pi."""
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    if pred.shape != truth.shape:
        raise DomainError(f"prediction {pred.shape} and truth {truth.shape} differ in shape")
    if pred.ndim == 2:
        pred, truth = pred[..., None], truth[..., None]
    sq = []
    for k, ch in enumerate(channels):
        d = pred[..., k] - truth[..., k]
        if ch == "phase":
            d = wrapped_difference(pred[..., k], truth[..., k])
        sq.append(d * d)
    return float(np.mean(sq))


def _as_grids(X) -> np.ndarray:
    if len(X) and isinstance(X[0], PixelGrid):
        return np.stack([g.cells for g in X]).astype(np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2 and X.shape[1] == N_PIXELS:
        X = X.reshape(-1, SIDE, SIDE)
    return X


class _NetworkEstimator(BaseEstimator):
    _direction: str = ""

    def __init__(
        self,
        family="cnn",
        input_mode=None,
        hidden_size=128,
        depth=2,
        attention_heads=4,
        supplement_band="none",
        channel="amp_x",
        band="low",
        spectrum_channels=("amp_x", "amp_y", "phase"),
        patch=16,
        seed=0,
        epochs=20,
        batch_size=8,
        learning_rate=1e-3,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        shuffle_seed=0,
        init="glorot",
        standardize=True,
    ):
        self.family = family
        self.input_mode = input_mode
        self.hidden_size = hidden_size
        self.depth = depth
        self.attention_heads = attention_heads
        self.supplement_band = supplement_band
        self.channel = channel
        self.band = band
        self.spectrum_channels = spectrum_channels
        self.patch = patch
        self.seed = seed
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.shuffle_seed = shuffle_seed
        self.init = init
        self.standardize = standardize

    # subclasses provide: _prepare(X, y, supplement) -> (inputs dict, internal target or None),
    # _batch(inputs, idx), _fit_normalisation(model, inputs, target)

    def model_config(self, band_size: int = 512) -> ModelConfig:
        return ModelConfig(
            family=self.family,
            direction=self._direction,
            input_mode=self.input_mode,
            hidden_size=self.hidden_size,
            depth=self.depth,
            attention_heads=self.attention_heads,
            supplement_band=self.supplement_band,
            channel=self.channel,
            band=self.band,
            spectrum_channels=tuple(self.spectrum_channels),
            band_size=band_size,
            patch=self.patch,
            seed=self.seed,
        )

    def _check_hyper(self):
        if self.epochs < 0 or self.batch_size <= 0:
            raise DomainError(f"epochs must be >= 0 and batch_size > 0, got {self.epochs}, {self.batch_size}")
        if self.init not in ("glorot", "zeros"):
            raise DomainError(f"init must be 'glorot' or 'zeros', got {self.init!r}")

    def _fit(self, inputs, target, band_size):
        self._check_hyper()
        model = build_model(self.model_config(band_size))
        if self.init == "zeros":
            for p in model.params.values():
                p.data = np.zeros_like(p.data)
        if self.standardize:
            self._fit_normalisation(model, inputs, target)
        scaled = self._scale_target(model, target)
        n = len(scaled)

        opt = Adam(model.parameters(), lr=self.learning_rate, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon)
        rng = np.random.default_rng(self.shuffle_seed)
        self.model_ = model
        self.initial_loss_ = self._internal_loss(inputs, scaled)
        self.loss_curve_ = []
        for _ in range(self.epochs):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                with Tape() as tape:
                    out = model.forward(self._batch(inputs, idx))
                    loss = ops.mse_loss(out, scaled[idx])
                    backward(loss, tape)
                opt.step()
                opt.zero_grad()
                total += loss.item() * len(idx)
            self.loss_curve_.append(total / n)
        self.final_loss_ = self._internal_loss(inputs, scaled)
        self.n_features_in_ = band_size
        return self

    def _scale_target(self, model, target):
        if self._direction == "inverse":
            return target
        return (target - model.buffers["out.mean"]) / model.buffers["out.scale"]

    def _internal_loss(self, inputs, scaled) -> float:
        sq = 0.0
        with no_grad():
            for start in range(0, len(scaled), _EVAL_BATCH):
                idx = np.arange(start, min(start + _EVAL_BATCH, len(scaled)))
                out = self.model_.forward(self._batch(inputs, idx)).data
                sq += float(((out - scaled[idx]) ** 2).sum())
        return sq / scaled.size

    def _predict_inputs(self, inputs, n):
        check_is_fitted(self, "model_")
        parts = []
        for start in range(0, n, _EVAL_BATCH):
            idx = np.arange(start, min(start + _EVAL_BATCH, n))
            parts.append(predict(self.model_, self._batch(inputs, idx)))
        return np.concatenate(parts, axis=0)

    @staticmethod
    def _channel_stats(arr):
        flat = arr.reshape(-1, arr.shape[-1])
        std = flat.std(axis=0)
        return flat.mean(axis=0), np.where(std > 0, std, 1.0)

    def _fit_output_stats(self, model, target):
        mean = target.mean(axis=0)
        scale = float(np.sqrt(((target - mean) ** 2).mean()))
        model.buffers["out.mean"] = mean
        model.buffers["out.scale"] = np.array([scale if scale > 0 else 1.0])

    # persistence
    def save(self, path, metadata: dict | None = None) -> None:
        check_is_fitted(self, "model_")
        params = self.get_params()
        params["spectrum_channels"] = list(params["spectrum_channels"])
        config = {
            "estimator": type(self).__name__,
            "params": params,
            "model": self.model_.config.to_dict(),
            "metadata": metadata or {},
        }
        save_checkpoint(path, config, self.model_.state_dict())

    @staticmethod
    def load(path):
        config, state = load_checkpoint(path)
        cls = _ESTIMATORS.get(config.get("estimator"))
        if cls is None:
            raise DomainError(f"unknown estimator {config.get('estimator')!r} in checkpoint")
        params = dict(config["params"])
        params["spectrum_channels"] = tuple(params["spectrum_channels"])
        est = cls(**params)
        model = build_model(ModelConfig.from_dict(config["model"]))
        model.load_state_dict(state)
        est.model_ = model
        est.n_features_in_ = model.config.band_size
        est.metadata_ = config.get("metadata", {})
        return est


class ForwardSpectrumRegressor(RegressorMixin, _NetworkEstimator):
    """Pattern -> one spectral channel over one band.

    ``X`` holds 25x25 patterns, ``y`` the target channel sampled over the
    band (phase in radians).  With ``supplement_band`` set, ``fit`` and
    ``predict`` also take the same channel over that band.
    """

    _direction = "forward"

    def _prepare(self, X, y=None, supplement=None):
        grids = _as_grids(X)
        mode = self.model_config(1).input_mode if not hasattr(self, "model_") else self.model_.config.input_mode
        inputs = {"pattern": pattern_input(grids, mode), "supp": None}
        if supplement is not None:
            inputs["supp"] = encode_channels(supplement, (self.channel,))
            if len(inputs["supp"]) != len(grids):
                raise DomainError("supplement and patterns differ in length")
        target = None
        if y is not None:
            target = encode_channels(y, (self.channel,))
            if len(target) != len(grids):
                raise DomainError(f"{len(grids)} patterns but {len(target)} targets")
        return inputs, target

    def _batch(self, inputs, idx):
        supp = inputs["supp"]
        return ForwardBatch(inputs["pattern"][idx], None if supp is None else supp[idx])

    def _fit_normalisation(self, model, inputs, target):
        self._fit_output_stats(model, target)
        if inputs["supp"] is not None:
            model.buffers["supp.mean"], model.buffers["supp.std"] = self._channel_stats(inputs["supp"])

    def fit(self, X, y, supplement=None):
        inputs, target = self._prepare(X, y, supplement)
        return self._fit(inputs, target, target.shape[1])

    def predict(self, X, supplement=None):
        inputs, _ = self._prepare(X, None, supplement)
        return self._predict_inputs(inputs, len(inputs["pattern"]))

    def mse(self, X, y, supplement=None) -> float:
        return spectral_mse(self.predict(X, supplement), y, (self.channel,))


class InversePatternRegressor(RegressorMixin, _NetworkEstimator):
    """Band spectra (n, L, channels) -> per-pixel probability of metal."""

    _direction = "inverse"

    def _prepare(self, X, y=None):
        inputs = {"spec": encode_channels(X, tuple(self.spectrum_channels))}
        target = None
        if y is not None:
            target = _as_grids(y).reshape(-1, N_PIXELS)
            if not np.isin(target, (0, 1)).all():
                raise DomainError("inverse targets must be binary")
            if len(target) != len(inputs["spec"]):
                raise DomainError(f"{len(inputs['spec'])} spectra but {len(target)} patterns")
        return inputs, target

    def _batch(self, inputs, idx):
        return InverseBatch(inputs["spec"][idx])

    def _fit_normalisation(self, model, inputs, target):
        model.buffers["in.mean"], model.buffers["in.std"] = self._channel_stats(inputs["spec"])

    def fit(self, X, y):
        inputs, target = self._prepare(X, y)
        return self._fit(inputs, target, inputs["spec"].shape[1])

    def predict(self, X):
        inputs, _ = self._prepare(X)
        return self._predict_inputs(inputs, len(inputs["spec"]))

    def predict_pattern(self, X) -> np.ndarray:
        return (self.predict(X) >= 0.5).astype(np.uint8).reshape(-1, SIDE, SIDE)

    def mse(self, X, y) -> float:
        return float(np.mean((self.predict(X) - _as_grids(y).reshape(-1, N_PIXELS)) ** 2))

    def pixel_accuracy(self, X, y) -> float:
        return float(np.mean(self.predict_pattern(X) == _as_grids(y)))


class BandTransferRegressor(RegressorMixin, _NetworkEstimator):
    """Spectra over one band -> the same channels over the other band."""

    _direction = "transfer"

    def _prepare(self, X, y=None):
        channels = tuple(self.spectrum_channels)
        inputs = {"spec": encode_channels(X, channels)}
        target = None if y is None else encode_channels(y, channels)
        if target is not None and target.shape[:2] != inputs["spec"].shape[:2]:
            raise DomainError(f"input {inputs['spec'].shape} and target {target.shape} bands differ")
        return inputs, target

    def _batch(self, inputs, idx):
        return TransferBatch(inputs["spec"][idx])

    def _fit_normalisation(self, model, inputs, target):
        self._fit_output_stats(model, target)
        model.buffers["in.mean"], model.buffers["in.std"] = self._channel_stats(inputs["spec"])

    def fit(self, X, y):
        inputs, target = self._prepare(X, y)
        return self._fit(inputs, target, inputs["spec"].shape[1])

    def predict(self, X):
        inputs, _ = self._prepare(X)
        return self._predict_inputs(inputs, len(inputs["spec"]))

    def mse(self, X, y) -> float:
        return spectral_mse(self.predict(X), y, tuple(self.spectrum_channels))


_ESTIMATORS = {
    cls.__name__: cls for cls in (ForwardSpectrumRegressor, InversePatternRegressor, BandTransferRegressor)
}
