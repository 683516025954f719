"""Differentiable primitives.

Every function takes :class:`Tensor` (or array-like) inputs, computes the
forward value with numpy and records a backward rule on the active tape.
Shape errors raise :class:`DomainError` naming the offending shapes.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .._errors import DomainError
from .tensor import Tensor, as_tensor, record


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_check(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DomainError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise -----------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "add")
    return record(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "sub")
    return record(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a, b, "mul")
    return record(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return record(x.data * mask, (x,), lambda g: (g * mask,))


_sigmoid = expit


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    return record(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    return record(t, (x,), lambda g: (g * (1.0 - t * t),))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return record(s, (x,), back)


def layer_norm(x, axis: int = -1, eps: float = 1e-5) -> Tensor:
    """Normalise to zero mean and unit variance along ``axis`` (no affine part)."""
    x = as_tensor(x)
    mu = x.data.mean(axis=axis, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv

    def back(g):
        gm = g.mean(axis=axis, keepdims=True)
        gy = (g * y).mean(axis=axis, keepdims=True)
        return (inv * (g - gm - y * gy),)

    return record(y, (x,), back)


# -- shape -----------------------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DomainError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return record(out, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def swapaxes(x, a: int, b: int) -> Tensor:
    x = as_tensor(x)
    axes = list(range(x.ndim))
    axes[a], axes[b] = axes[b], axes[a]
    return transpose(x, axes)


def slice_(x, index) -> Tensor:
    x = as_tensor(x)
    out = x.data[index]

    def back(g):
        full = np.zeros_like(x.data)
        if _needs_add_at(index):
            np.add.at(full, index, g)
        else:
            full[index] = g
        return (full,)

    return record(np.array(out), (x,), back)


def _needs_add_at(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError:
        raise DomainError(f"concat: incompatible shapes {[t.shape for t in ts]} on axis {axis}") from None
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return record(out, tuple(ts), lambda g: tuple(np.split(g, bounds, axis=axis)))


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record(out, (x,), back)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum_(x, axis, keepdims), 1.0 / count)


# -- linear algebra --------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DomainError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise DomainError(f"matmul: batch shapes {a.shape} and {b.shape} do not broadcast") from None

    def back(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            if b.ndim == 2:
                k = a.shape[-1]
                gb = a.data.reshape(-1, k).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return record(out, (a, b), back)


def linear(x, weight, bias=None) -> Tensor:
    y = matmul(x, weight)
    return y if bias is None else add(y, bias)


# -- convolution and pooling -----------------------------------------------

def _pair(v):
    return (v, v) if np.isscalar(v) else tuple(v)


def conv2d(x, kernel, stride=1, padding=0) -> Tensor:
    """Cross-correlation of an NCHW input with an OIhw kernel."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise DomainError(f"conv2d: input {x.shape} and kernel {kernel.shape} are incompatible")
    sh, sw = _pair(stride)
    ph, pw = _pair(padding)
    n, c, h, w = x.shape
    o, _, kh, kw = kernel.shape
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if ph or pw else x.data
    hp, wp = xp.shape[2:]
    if hp < kh or wp < kw:
        raise DomainError(f"conv2d: kernel {kernel.shape} larger than padded input {xp.shape}")
    ho, wo = (hp - kh) // sh + 1, (wp - kw) // sw + 1
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
    wmat = kernel.data.reshape(o, -1)
    out = (cols @ wmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)

    def back(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(-1, o)
        gk = (gmat.T @ cols).reshape(kernel.shape) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (gmat @ wmat).reshape(n, ho, wo, c, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            gx = gxp[:, :, ph:ph + h, pw:pw + w]
        return gx, gk

    return record(np.ascontiguousarray(out), (x, kernel), back)


def max_pool2d(x, kernel_size=2, stride=None) -> Tensor:
    """Max pooling over NCHW input, floor mode (trailing rows/cols dropped)."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise DomainError(f"max_pool2d: expected NCHW input, got {x.shape}")
    kh, kw = _pair(kernel_size)
    sh, sw = _pair(stride if stride is not None else kernel_size)
    h, w = x.shape[2:]
    if h < kh or w < kw:
        raise DomainError(f"max_pool2d: window {(kh, kw)} larger than input {x.shape}")
    win = sliding_window_view(x.data, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    ho, wo = win.shape[2:4]
    flat = win.reshape(*win.shape[:4], kh * kw)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def back(g):
        gx = np.zeros_like(x.data)
        for i in range(kh):
            for j in range(kw):
                hit = arg == i * kw + j
                gx[:, :, i:i + sh * ho:sh, j:j + sw * wo:sw] += g * hit
        return (gx,)

    return record(out, (x,), back)


# -- losses ----------------------------------------------------------------

def mse_loss(pred, target) -> Tensor:
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DomainError(f"mse_loss: shapes {pred.shape} and {target.shape} differ")
    diff = pred.data - target.data
    scale = 2.0 / diff.size
    return record(
        np.mean(diff * diff), (pred, target),
        lambda g: (g * scale * diff, -g * scale * diff),
    )
