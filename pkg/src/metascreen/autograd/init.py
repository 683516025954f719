"""Seeded parameter initialisers.

Each parameter draws from its own stream keyed by ``(seed, crc32(name))`` so
adding a parameter to a model never perturbs the others.
"""
from __future__ import annotations

import zlib

import numpy as np


def param_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed & 0xFFFFFFFF, seed >> 32 & 0xFFFFFFFF, zlib.crc32(name.encode())])


def glorot_uniform(seed, name, shape, fan_in, fan_out) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return param_rng(seed, name).uniform(-limit, limit, size=shape)


def recurrent_uniform(seed, name, shape, hidden) -> np.ndarray:
    limit = 1.0 / np.sqrt(hidden)
    return param_rng(seed, name).uniform(-limit, limit, size=shape)
