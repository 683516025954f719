"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._errors import DomainError
from .tensor import Tensor


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    lr: float = 1e-3
    epsilon: float = 1e-8

    @classmethod
    def for_param(cls, param: Tensor, **hyper) -> AdamState:
        return cls(m=np.zeros_like(param.data), v=np.zeros_like(param.data), **hyper)


def adam_step(params: list[Tensor], states: list[AdamState]) -> None:
    """Apply one Adam update in place to every parameter."""
    if len(params) != len(states):
        raise DomainError(f"{len(params)} params but {len(states)} optimizer states")
    for p, s in zip(params, states):
        if p.grad is None:
            raise DomainError(f"parameter {p.name or p.shape} has no gradient")
        if s.m.shape != p.data.shape:
            raise DomainError(f"state shape {s.m.shape} does not match parameter {p.data.shape}")
    for p, s in zip(params, states):
        g = p.grad
        s.step_count += 1
        s.m *= s.beta1
        s.m += (1.0 - s.beta1) * g
        s.v *= s.beta2
        s.v += (1.0 - s.beta2) * (g * g)
        m_hat = s.m / (1.0 - s.beta1 ** s.step_count)
        denom = np.sqrt(s.v / (1.0 - s.beta2 ** s.step_count))
        denom += s.epsilon
        m_hat *= s.lr
        m_hat /= denom
        p.data -= m_hat


@dataclass
class Adam:
    params: list[Tensor]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    states: list[AdamState] = field(init=False)

    def __post_init__(self):
        hyper = dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon)
        self.states = [AdamState.for_param(p, **hyper) for p in self.params]

    def step(self) -> None:
        adam_step(self.params, self.states)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
