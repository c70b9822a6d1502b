"""Deterministic weight initialization.

Every conv/linear tensor gets its own PCG64 stream seeded with
``SeedSequence([seed, crc32(tensor name)])``. Values are float32 draws
``u`` in [0, 1) mapped to ``(2u - 1) / sqrt(fan_in)``. PCG64 and the float32
draw are bit-exact across platforms, so the same seed yields the same bytes
everywhere, and a tensor's values do not depend on which other tensors exist.
Batch norms start at identity statistics.
"""

from __future__ import annotations

import zlib

import numpy as np

from ..tensor.types import DTYPE
from .model import ModelGraph


def tensor_rng(seed: int, name: str) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, zlib.crc32(name.encode())])))


def init_weights(graph: ModelGraph, seed: int = 0) -> ModelGraph:
    weights = {}
    for node in graph.nodes:
        if node.kind in ("conv", "linear"):
            scale = DTYPE(1.0 / np.sqrt(node.conv.fan_in))
            for name, shape in node.param_shapes().items():
                u = tensor_rng(seed, name).random(shape, dtype=DTYPE)
                weights[name] = (u * DTYPE(2) - DTYPE(1)) * scale
        elif node.kind == "bn":
            c = node.channels
            weights[f"{node.name}.gamma"] = np.ones(c, DTYPE)
            weights[f"{node.name}.beta"] = np.zeros(c, DTYPE)
            weights[f"{node.name}.running_mean"] = np.zeros(c, DTYPE)
            weights[f"{node.name}.running_var"] = np.ones(c, DTYPE)
    return graph.with_weights(weights)
