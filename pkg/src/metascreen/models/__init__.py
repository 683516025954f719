"""CNN, LSTM, GRU and Transformer networks for screens and spectra."""
from .config import BANDS, CHANNELS, DIRECTIONS, FAMILIES, ModelConfig, channel_width, other_band
from .estimators import (
    BandTransferRegressor,
    ForwardSpectrumRegressor,
    InversePatternRegressor,
    spectral_mse,
)
from .layers import gru_cell, lstm_cell, self_attention
from .networks import (
    ForwardBatch,
    InverseBatch,
    Model,
    TransferBatch,
    build_model,
    decode_channels,
    encode_channels,
    pattern_input,
    predict,
)

__all__ = [
    "BANDS", "CHANNELS", "DIRECTIONS", "FAMILIES", "BandTransferRegressor", "ForwardBatch",
    "ForwardSpectrumRegressor", "InverseBatch", "InversePatternRegressor", "Model", "ModelConfig",
    "TransferBatch", "build_model", "channel_width", "decode_channels", "encode_channels",
    "gru_cell", "lstm_cell", "other_band", "pattern_input", "predict", "self_attention",
    "spectral_mse",
]
