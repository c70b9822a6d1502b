"""The immutable model graph and the batch forward pass."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from types import MappingProxyType, ModuleType
from typing import Any, Dict, Mapping, NamedTuple, Optional, Tuple

import numpy as np
from threadpoolctl import threadpool_limits

from ..graph import JUNCTIONS, Node, execute, param_shapes
from ..tensor import ops
from ..tensor.types import DTYPE, ShapeError

_EMPTY: Mapping[str, np.ndarray] = MappingProxyType({})


class Junction(NamedTuple):
    node: str
    kind: str  # "add" | "concat"
    inputs: Tuple[str, ...]


@dataclass(frozen=True)
class ModelGraph:
    arch: str
    width: float
    num_classes: int
    input_shape: Tuple[int, int, int, int]
    nodes: Tuple[Node, ...]
    output: str
    blocks: Mapping[str, Any] = field(default_factory=lambda: MappingProxyType({}))
    channels: Mapping[str, Any] = field(default_factory=lambda: MappingProxyType({}))
    weights: Mapping[str, np.ndarray] = _EMPTY

    @property
    def name(self) -> str:
        return self.arch if self.arch == "squeezenet" else f"{self.arch}_{self.width:g}x"

    @property
    def skip_edges(self) -> Tuple[Junction, ...]:
        return tuple(Junction(n.name, n.kind, n.inputs) for n in self.nodes if n.kind in JUNCTIONS)

    def node(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def param_shapes(self) -> Dict[str, tuple]:
        return param_shapes(self.nodes)

    def block_outputs(self) -> Dict[str, str]:
        """Block name -> the node producing that block's output (its last node)."""
        return {n.block: n.name for n in self.nodes if n.block is not None}

    def with_weights(self, weights: Mapping[str, np.ndarray]) -> "ModelGraph":
        """Return a copy holding ``weights`` (validated, float32, read-only)."""
        expected = self.param_shapes()
        if set(weights) != set(expected):
            missing = sorted(set(expected) - set(weights))[:5]
            extra = sorted(set(weights) - set(expected))[:5]
            raise ShapeError(f"weight names do not match graph (missing {missing}, unexpected {extra})")
        frozen = {}
        for name, shape in expected.items():
            arr = np.array(weights[name], dtype=DTYPE, order="C")
            if arr.shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name}: non-finite weights")
            arr.setflags(write=False)
            frozen[name] = arr
        return replace(self, weights=MappingProxyType(frozen))


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def forward(graph: ModelGraph, x: np.ndarray, threads: Optional[int] = None,
            backend: ModuleType = ops) -> np.ndarray:
    """Class scores (n, num_classes), pre-softmax.

    Batch items run independently, across ``threads`` workers when more than
    one is requested. BLAS is pinned to one thread per call so each item's
    arithmetic is identical whatever the worker count.
    """
    if not graph.weights:
        raise ValueError("graph has no weights; call init_weights or load a weight file first")
    x = np.asarray(x)
    if x.ndim != 5 or tuple(x.shape[1:]) != tuple(graph.input_shape):
        raise ShapeError(f"{graph.name} expects input (n, {', '.join(map(str, graph.input_shape))}), got {x.shape}")
    x = np.ascontiguousarray(x, dtype=DTYPE)
    n = x.shape[0]
    threads = default_threads() if threads is None else max(1, int(threads))

    def one(i: int) -> np.ndarray:
        return execute(graph.nodes, graph.output, x[i:i + 1], graph.weights, backend).reshape(-1)

    with threadpool_limits(limits=1, user_api="blas"):
        if threads == 1 or n == 1:
            rows = [one(i) for i in range(n)]
        else:
            with ThreadPoolExecutor(max_workers=min(threads, n)) as pool:
                rows = list(pool.map(one, range(n)))
    return np.stack(rows).astype(DTYPE, copy=False)
