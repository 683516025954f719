"""Reverse-mode automatic differentiation on numpy arrays."""
from .ops import (
    add, concat, conv2d, layer_norm, linear, matmul, max_pool2d, mean, mse_loss, mul,
    relu, reshape, sigmoid, slice_, softmax, sub, sum_, swapaxes, tanh, transpose,
)
from .optim import Adam, AdamState, adam_step
from .tensor import Tape, Tensor, backward, current_tape, no_grad

__all__ = [
    "Adam", "AdamState", "Tape", "Tensor", "adam_step", "add", "backward", "concat",
    "conv2d", "current_tape", "layer_norm", "linear", "matmul", "max_pool2d", "mean",
    "mse_loss", "mul", "no_grad", "relu", "reshape", "sigmoid", "slice_", "softmax",
    "sub", "sum_", "swapaxes", "tanh", "transpose",
]
