"""Tensor values and the tape that records operations for reverse-mode AD."""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from .._errors import DomainError


class Tensor:
    """Float64 n-d array that can take part in differentiation.

    ``grad`` is populated by :func:`backward` on leaf tensors that require it.
    """

    __slots__ = ("data", "requires_grad", "grad", "is_leaf", "name", "__weakref__")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.is_leaf = True
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def values(self) -> np.ndarray:
        """Row-major flat view of the data."""
        return self.data.reshape(-1)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_error(self)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from .ops import mul
        return mul(self, -1.0)

    def __truediv__(self, other):
        from .ops import mul
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def __getitem__(self, index):
        from .ops import slice_
        return slice_(self, index)

    def reshape(self, *shape):
        from .ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        from .ops import transpose
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from .ops import sum_
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        from .ops import mean
        return mean(self, axis, keepdims)


def _scalar_error(t):
    raise DomainError(f"item() needs a single-element tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Node:
    __slots__ = ("outputs", "inputs", "backward")

    def __init__(self, outputs, inputs, backward):
        self.outputs = outputs
        self.inputs = inputs
        self.backward = backward


class Tape:
    """Ordered record of operations; creation order is a topological order."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def __len__(self):
        return len(self.nodes)

    def reset(self) -> None:
        self.nodes.clear()


_TAPES: list[Tape] = [Tape()]
_GRAD_ENABLED = [True]


def current_tape() -> Tape:
    return _TAPES[-1]


@contextmanager
def no_grad():
    _GRAD_ENABLED.append(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.pop()


def record(outputs, inputs, backward_fn):
    """Wrap raw output arrays in tensors and put the op on the active tape.

    ``backward_fn`` receives one gradient array per output and returns one
    gradient (or ``None``) per input.
    """
    single = not isinstance(outputs, tuple)
    outs = tuple(Tensor(o) for o in ((outputs,) if single else outputs))
    if _GRAD_ENABLED[-1] and any(t.requires_grad for t in inputs):
        for o in outs:
            o.requires_grad = True
            o.is_leaf = False
        _TAPES[-1].nodes.append(Node(outs, tuple(inputs), backward_fn))
    return outs[0] if single else outs


def backward(loss: Tensor, tape: Tape | None = None) -> int:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf on the tape.

    Walks the tape once in reverse, then clears it.  Returns the number of
    nodes whose backward rule ran.
    """
    if loss.data.size != 1:
        raise DomainError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = tape or current_tape()
    pending = {id(loss): np.ones_like(loss.data)}
    if loss.is_leaf and loss.requires_grad:
        loss.grad = pending[id(loss)] if loss.grad is None else loss.grad + pending[id(loss)]
    visited = 0
    for node in reversed(tape.nodes):
        gouts = [pending.pop(id(o), None) for o in node.outputs]
        if all(g is None for g in gouts):
            continue
        gouts = [np.zeros_like(o.data) if g is None else g for o, g in zip(node.outputs, gouts)]
        visited += 1
        for inp, g in zip(node.inputs, node.backward(*gouts)):
            if g is None or not inp.requires_grad:
                continue
            if inp.is_leaf:
                inp.grad = g.copy() if inp.grad is None else inp.grad + g
            else:
                key = id(inp)
                pending[key] = g if key not in pending else pending[key] + g
    tape.reset()
    return visited
