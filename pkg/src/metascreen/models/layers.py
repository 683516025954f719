"""Recurrent cells and self-attention built on the autograd primitives.

The LSTM and GRU cells are fused primitives with hand-derived backward rules.
``lstm_layer``/``gru_layer`` fuse a whole unrolled sequence into one tape node
so the input projection and the weight gradients become single matrix
products; the networks use these, the cells are the per-step reference.
"""
from __future__ import annotations

import numpy as np

from .._errors import DomainError
from ..autograd import ops
from ..autograd.ops import _sigmoid
from ..autograd.tensor import Tensor, as_tensor, record


def _check_cell(x, h, w_x, w_h, n_gates):
    hid = h.shape[-1]
    if x.ndim != 2 or h.ndim != 2 or x.shape[0] != h.shape[0]:
        raise DomainError(f"cell: input {x.shape} and state {h.shape} must be (batch, features)")
    if w_x.shape != (x.shape[1], n_gates * hid) or w_h.shape != (hid, n_gates * hid):
        raise DomainError(
            f"cell: weights {w_x.shape}, {w_h.shape} do not match input {x.shape} and state {h.shape}"
        )


def lstm_cell(x, h, c, w_x, w_h, b) -> tuple[Tensor, Tensor]:
    """One LSTM step; gate blocks are ordered input, forget, candidate, output."""
    x, h, c, w_x, w_h, b = (as_tensor(t) for t in (x, h, c, w_x, w_h, b))
    _check_cell(x, h, w_x, w_h, 4)
    if c.shape != h.shape or b.shape != (w_h.shape[1],):
        raise DomainError(f"lstm_cell: cell state {c.shape} / bias {b.shape} mismatch")
    n = h.shape[1]
    a = x.data @ w_x.data + h.data @ w_h.data + b.data
    i = _sigmoid(a[:, :n])
    f = _sigmoid(a[:, n:2 * n])
    g = np.tanh(a[:, 2 * n:3 * n])
    o = _sigmoid(a[:, 3 * n:])
    c_new = f * c.data + i * g
    tc = np.tanh(c_new)
    h_new = o * tc

    def back(gh, gc):
        dc = gc + gh * o * (1.0 - tc * tc)
        da = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c.data * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                gh * tc * o * (1.0 - o),
            ],
            axis=1,
        )
        return (
            da @ w_x.data.T,
            da @ w_h.data.T,
            dc * f,
            x.data.T @ da,
            h.data.T @ da,
            da.sum(axis=0),
        )

    return record((h_new, c_new), (x, h, c, w_x, w_h, b), back)


def gru_cell(x, h, w_x, w_h, b_x, b_h) -> Tensor:
    """One GRU step; gate blocks are ordered reset, update, candidate.

    ``h' = (1 - z) * n + z * h`` so an update gate saturated at 1 carries the
    state through unchanged.
    """
    x, h, w_x, w_h, b_x, b_h = (as_tensor(t) for t in (x, h, w_x, w_h, b_x, b_h))
    _check_cell(x, h, w_x, w_h, 3)
    n = h.shape[1]
    if b_x.shape != (3 * n,) or b_h.shape != (3 * n,):
        raise DomainError(f"gru_cell: biases {b_x.shape}, {b_h.shape} must be ({3 * n},)")
    ax = x.data @ w_x.data + b_x.data
    ah = h.data @ w_h.data + b_h.data
    r = _sigmoid(ax[:, :n] + ah[:, :n])
    z = _sigmoid(ax[:, n:2 * n] + ah[:, n:2 * n])
    ah_n = ah[:, 2 * n:]
    cand = np.tanh(ax[:, 2 * n:] + r * ah_n)
    h_new = (1.0 - z) * cand + z * h.data

    def back(gh):
        dn = gh * (1.0 - z) * (1.0 - cand * cand)
        dz = gh * (h.data - cand) * z * (1.0 - z)
        dr = dn * ah_n * r * (1.0 - r)
        dax = np.concatenate([dr, dz, dn], axis=1)
        dah = np.concatenate([dr, dz, dn * r], axis=1)
        return (
            dax @ w_x.data.T,
            gh * z + dah @ w_h.data.T,
            x.data.T @ dax,
            h.data.T @ dah,
            dax.sum(axis=0),
            dah.sum(axis=0),
        )

    return record(h_new, (x, h, w_x, w_h, b_x, b_h), back)


def self_attention(hidden, heads: int, w_out, b_out=None, return_weights: bool = False):
    """Multi-head scaled dot-product self-attention with queries = keys = values = ``hidden``.

    ``hidden`` is (batch, seq, dim); each head sees a contiguous ``dim // heads``
    slice.  Heads are concatenated and passed through ``w_out``/``b_out``.
    """
    hidden = as_tensor(hidden)
    if hidden.ndim != 3:
        raise DomainError(f"self_attention: expected (batch, seq, dim), got {hidden.shape}")
    bsz, seq, dim = hidden.shape
    if heads <= 0 or dim % heads:
        raise DomainError(f"self_attention: dim {dim} not divisible by {heads} heads")
    d = dim // heads
    q = ops.transpose(ops.reshape(hidden, (bsz, seq, heads, d)), (0, 2, 1, 3))
    scores = ops.mul(ops.matmul(q, ops.swapaxes(q, -1, -2)), 1.0 / np.sqrt(d))
    weights = ops.softmax(scores, axis=-1)
    ctx = ops.matmul(weights, q)
    merged = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (bsz, seq, dim))
    out = ops.linear(merged, w_out, b_out)
    return (out, weights) if return_weights else out


def sinusoidal_positions(seq: int, dim: int) -> np.ndarray:
    pos = np.arange(seq)[:, None]
    rate = np.exp(-np.log(10000.0) * (np.arange(0, dim, 2) / dim))
    table = np.zeros((seq, dim))
    table[:, 0::2] = np.sin(pos * rate)
    table[:, 1::2] = np.cos(pos * rate[: dim // 2])
    return table


def _sequence_input(x, w_x, w_h, n_gates):
    x = as_tensor(x)
    if x.ndim != 3:
        raise DomainError(f"recurrent layer: expected (batch, steps, features), got {x.shape}")
    hid = w_h.shape[0]
    if w_x.shape != (x.shape[2], n_gates * hid) or w_h.shape != (hid, n_gates * hid):
        raise DomainError(f"recurrent layer: weights {w_x.shape}, {w_h.shape} do not match input {x.shape}")
    return x


def lstm_layer(x, w_x, w_h, b) -> Tensor:
    """Run :func:`lstm_cell` over (batch, steps, features) from a zero state.

    Returns every hidden state, (batch, steps, hidden).  Fused: the input
    projection and the weight gradients are single matrix products.
    """
    w_x, w_h, b = as_tensor(w_x), as_tensor(w_h), as_tensor(b)
    x = _sequence_input(x, w_x, w_h, 4)
    bsz, steps, feat = x.shape
    n = w_h.shape[0]
    proj = (x.data.reshape(-1, feat) @ w_x.data + b.data).reshape(bsz, steps, 4 * n)
    wh = w_h.data
    hs = np.zeros((steps + 1, bsz, n))
    cs = np.zeros((steps + 1, bsz, n))
    gates = np.empty((steps, bsz, 4 * n))
    tcs = np.empty((steps, bsz, n))
    # sigmoid(a) = (1 + tanh(a / 2)) / 2; one tanh call per step covers all gates
    half = np.full(4 * n, 0.5)
    half[2 * n:3 * n] = 1.0
    for t in range(steps):
        sg = gates[t]
        np.tanh((proj[:, t] + hs[t] @ wh) * half, out=sg)
        sg[:, :2 * n] += 1.0
        sg[:, :2 * n] *= 0.5
        sg[:, 3 * n:] += 1.0
        sg[:, 3 * n:] *= 0.5
        cs[t + 1] = sg[:, n:2 * n] * cs[t] + sg[:, :n] * sg[:, 2 * n:3 * n]
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = sg[:, 3 * n:] * tcs[t]

    def back(g_all):
        da = np.empty((bsz, steps, 4 * n))
        dh = np.zeros((bsz, n))
        dc_next = np.zeros((bsz, n))
        for t in range(steps - 1, -1, -1):
            i, f, gg, o = (gates[t][:, k * n:(k + 1) * n] for k in range(4))
            gh = g_all[:, t] + dh
            dc = dc_next + gh * o * (1.0 - tcs[t] ** 2)
            d = da[:, t]
            d[:, :n] = dc * gg * i * (1.0 - i)
            d[:, n:2 * n] = dc * cs[t] * f * (1.0 - f)
            d[:, 2 * n:3 * n] = dc * i * (1.0 - gg * gg)
            d[:, 3 * n:] = gh * tcs[t] * o * (1.0 - o)
            dh = d @ wh.T
            dc_next = dc * f
        da2 = da.reshape(-1, 4 * n)
        hprev = hs[:-1].transpose(1, 0, 2).reshape(-1, n)
        return (
            (da2 @ w_x.data.T).reshape(x.shape),
            x.data.reshape(-1, feat).T @ da2,
            hprev.T @ da2,
            da2.sum(axis=0),
        )

    return record(np.ascontiguousarray(hs[1:].transpose(1, 0, 2)), (x, w_x, w_h, b), back)


def gru_layer(x, w_x, w_h, b_x, b_h) -> Tensor:
    """Run :func:`gru_cell` over (batch, steps, features) from a zero state."""
    w_x, w_h, b_x, b_h = (as_tensor(t) for t in (w_x, w_h, b_x, b_h))
    x = _sequence_input(x, w_x, w_h, 3)
    bsz, steps, feat = x.shape
    n = w_h.shape[0]
    proj = (x.data.reshape(-1, feat) @ w_x.data + b_x.data).reshape(bsz, steps, 3 * n)
    wh = w_h.data
    hs = np.zeros((steps + 1, bsz, n))
    rz = np.empty((steps, bsz, 2 * n))
    cands = np.empty((steps, bsz, n))
    ahn = np.empty((steps, bsz, n))
    for t in range(steps):
        ah = hs[t] @ wh + b_h.data
        np.tanh(0.5 * (proj[:, t, :2 * n] + ah[:, :2 * n]), out=rz[t])
        rz[t] += 1.0
        rz[t] *= 0.5
        ahn[t] = ah[:, 2 * n:]
        cands[t] = np.tanh(proj[:, t, 2 * n:] + rz[t][:, :n] * ahn[t])
        z = rz[t][:, n:]
        hs[t + 1] = (1.0 - z) * cands[t] + z * hs[t]

    def back(g_all):
        dax = np.empty((bsz, steps, 3 * n))
        dah = np.empty((bsz, steps, 3 * n))
        dh = np.zeros((bsz, n))
        for t in range(steps - 1, -1, -1):
            r, z, cand = rz[t][:, :n], rz[t][:, n:], cands[t]
            gh = g_all[:, t] + dh
            dn = gh * (1.0 - z) * (1.0 - cand * cand)
            dz = gh * (hs[t] - cand) * z * (1.0 - z)
            dr = dn * ahn[t] * r * (1.0 - r)
            dax[:, t, :n] = dr
            dax[:, t, n:2 * n] = dz
            dax[:, t, 2 * n:] = dn
            dah[:, t, :2 * n] = dax[:, t, :2 * n]
            dah[:, t, 2 * n:] = dn * r
            dh = gh * z + dah[:, t] @ wh.T
        dx2 = dax.reshape(-1, 3 * n)
        dh2 = dah.reshape(-1, 3 * n)
        hprev = hs[:-1].transpose(1, 0, 2).reshape(-1, n)
        return (
            (dx2 @ w_x.data.T).reshape(x.shape),
            x.data.reshape(-1, feat).T @ dx2,
            hprev.T @ dh2,
            dx2.sum(axis=0),
            dh2.sum(axis=0),
        )

    return record(np.ascontiguousarray(hs[1:].transpose(1, 0, 2)), (x, w_x, w_h, b_x, b_h), back)
