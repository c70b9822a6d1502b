"""Primitive-level dataflow graph: nodes, a builder with shape tracking, and an executor.

Blocks and whole networks are both expressed as flat lists of primitive
:class:`Node` objects wired by name. The same node list drives execution
(:func:`execute`) and every static analysis in :mod:`lite3d.analyzer`.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from types import ModuleType
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .tensor import ops
from .tensor.types import DTYPE, BatchNormParams, ConvSpec, PoolSpec, ShapeError

INPUT = "input"

CONV_KINDS = ("conv", "linear")
ACTIVATIONS = ("relu", "relu6")
JUNCTIONS = ("add", "concat")
KINDS = CONV_KINDS + ACTIVATIONS + JUNCTIONS + ("bn", "maxpool", "avgpool", "shuffle", "slice")

Shape = Tuple[int, int, int, int]


@dataclass(frozen=True)
class Node:
    name: str
    kind: str
    inputs: Tuple[str, ...]
    conv: Optional[ConvSpec] = None  # conv and linear
    pool: Optional[PoolSpec] = None
    channels: int = 0  # bn
    groups: int = 1  # shuffle
    span: Optional[Tuple[int, int]] = None  # slice
    eps: float = 1e-5
    block: Optional[str] = None

    @property
    def params(self) -> Tuple[str, ...]:
        """Names of the weight tensors this node reads."""
        if self.kind in CONV_KINDS:
            assert self.conv is not None
            return (f"{self.name}.weight",) + ((f"{self.name}.bias",) if self.conv.has_bias else ())
        if self.kind == "bn":
            return tuple(f"{self.name}.{p}" for p in ("gamma", "beta", "running_mean", "running_var"))
        return ()

    def param_shapes(self) -> Dict[str, tuple]:
        if self.kind == "conv":
            shapes = [self.conv.weight_shape, (self.conv.out_ch,)]
        elif self.kind == "linear":
            shapes = [(self.conv.out_ch, self.conv.in_ch), (self.conv.out_ch,)]
        elif self.kind == "bn":
            shapes = [(self.channels,)] * 4
        else:
            shapes = []
        return dict(zip(self.params, shapes))


def node_output_shape(node: Node, in_shapes: Sequence[Shape]) -> Shape:
    """Static shape rule for one node given the (c, d, h, w) shapes of its inputs."""
    first = tuple(in_shapes[0])
    k = node.kind
    if k == "conv":
        return node.conv.output_shape(first)
    if k == "linear":
        if first[1:] != (1, 1, 1) or first[0] != node.conv.in_ch:
            raise ShapeError(f"{node.name}: linear expects ({node.conv.in_ch}, 1, 1, 1), got {first}")
        return (node.conv.out_ch, 1, 1, 1)
    if k in ("maxpool", "avgpool"):
        return node.pool.output_shape(first)
    if k == "bn":
        if first[0] != node.channels:
            raise ShapeError(f"{node.name}: batch-norm over {node.channels} channels, got {first[0]}")
        return first
    if k in ACTIVATIONS:
        return first
    if k == "shuffle":
        if first[0] % node.groups:
            raise ShapeError(f"{node.name}: {first[0]} channels not divisible by {node.groups}")
        return first
    if k == "slice":
        a, b = node.span
        if not 0 <= a < b <= first[0]:
            raise ShapeError(f"{node.name}: slice {node.span} outside {first[0]} channels")
        return (b - a,) + first[1:]
    if k == "concat":
        a, b = first, tuple(in_shapes[1])
        if a[1:] != b[1:]:
            raise ShapeError(f"{node.name}: cannot concat {a} and {b}")
        return (a[0] + b[0],) + a[1:]
    if k == "add":
        if first != tuple(in_shapes[1]):
            raise ShapeError(f"{node.name}: cannot add {first} and {tuple(in_shapes[1])}")
        return first
    raise ShapeError(f"unknown node kind {k!r}")


class GraphBuilder:
    """Appends nodes in topological order and tracks every value's shape."""

    def __init__(self, input_shape: Sequence[int]):
        shape = tuple(int(v) for v in input_shape)
        if len(shape) != 4 or min(shape) < 1:
            raise ShapeError(f"input shape must be (c, d, h, w) with positive dims, got {input_shape}")
        self.nodes: List[Node] = []
        self.shapes: Dict[str, Shape] = {INPUT: shape}  # type: ignore[dict-item]
        self.blocks: Dict[str, Any] = {}
        self._prefix: List[str] = []
        self._block: Optional[str] = None

    input = INPUT

    def shape(self, ref: str) -> Shape:
        return self.shapes[ref]

    def channels(self, ref: str) -> int:
        return self.shapes[ref][0]

    @contextmanager
    def scope(self, name: str, block: Any = None) -> Iterator[None]:
        """Prefix node names with ``name``; when ``block`` is given, tag nodes as belonging to it."""
        self._prefix.append(name)
        outer = self._block
        if block is not None:
            self._block = ".".join(self._prefix)
            self.blocks[self._block] = block
        try:
            yield
        finally:
            self._prefix.pop()
            self._block = outer

    def _add(self, kind: str, inputs: Sequence[str], name: str, **attrs: Any) -> str:
        full = ".".join(self._prefix + [name])
        if full in self.shapes:
            raise ValueError(f"duplicate node name {full!r}")
        for ref in inputs:
            if ref not in self.shapes:
                raise ValueError(f"{full}: unknown input {ref!r}")
        node = Node(full, kind, tuple(inputs), block=self._block, **attrs)
        self.shapes[full] = node_output_shape(node, [self.shapes[r] for r in inputs])
        self.nodes.append(node)
        return full

    def conv(self, x: str, name: str, out_ch: int, kernel=1, stride=1, padding=0, groups: int = 1,
             bias: bool = False) -> str:
        spec = ConvSpec(self.channels(x), out_ch, kernel, stride, padding, groups, bias)
        return self._add("conv", [x], name, conv=spec)

    def linear(self, x: str, name: str, out_features: int) -> str:
        return self._add("linear", [x], name, conv=ConvSpec(self.channels(x), out_features, has_bias=True))

    def bn(self, x: str, name: str, eps: float = 1e-5) -> str:
        return self._add("bn", [x], name, channels=self.channels(x), eps=eps)

    def relu(self, x: str, name: str) -> str:
        return self._add("relu", [x], name)

    def relu6(self, x: str, name: str) -> str:
        return self._add("relu6", [x], name)

    def maxpool(self, x: str, name: str, kernel=3, stride=2, padding=1) -> str:
        return self._add("maxpool", [x], name, pool=PoolSpec("max", kernel, stride, padding))

    def avgpool(self, x: str, name: str, kernel=3, stride=2, padding=1) -> str:
        return self._add("avgpool", [x], name, pool=PoolSpec("avg", kernel, stride, padding))

    def global_avgpool(self, x: str, name: str) -> str:
        return self.avgpool(x, name, kernel=self.shape(x)[1:], stride=1, padding=0)

    def shuffle(self, x: str, name: str, groups: int) -> str:
        return self._add("shuffle", [x], name, groups=groups)

    def slice(self, x: str, name: str, start: int, stop: int) -> str:
        return self._add("slice", [x], name, span=(start, stop))

    def concat(self, a: str, b: str, name: str) -> str:
        return self._add("concat", [a, b], name)

    def add(self, a: str, b: str, name: str) -> str:
        return self._add("add", [a, b], name)


def param_shapes(nodes: Sequence[Node]) -> Dict[str, tuple]:
    out: Dict[str, tuple] = {}
    for node in nodes:
        out.update(node.param_shapes())
    return out


def _last_use(nodes: Sequence[Node], output: str) -> Dict[str, int]:
    last = {output: len(nodes)}
    for i, node in enumerate(nodes):
        for ref in node.inputs:
            last[ref] = max(last.get(ref, i), i)
    return last


def run_node(node: Node, args: Sequence[np.ndarray], weights: Mapping[str, np.ndarray],
             backend: ModuleType = ops) -> np.ndarray:
    k = node.kind
    x = args[0]
    if k in CONV_KINDS:
        w = weights[f"{node.name}.weight"]
        b = weights[f"{node.name}.bias"] if node.conv.has_bias else None
        return backend.conv3d(x, w, b, node.conv) if k == "conv" else backend.linear(x, w, b)
    if k == "bn":
        p = BatchNormParams(*(weights[n] for n in node.params), eps=node.eps)
        return backend.batchnorm_infer(x, p)
    if k == "relu":
        return backend.relu(x)
    if k == "relu6":
        return backend.relu6(x)
    if k in ("maxpool", "avgpool"):
        return backend.pool3d(x, node.pool)
    if k == "shuffle":
        return backend.channel_shuffle(x, node.groups)
    if k == "slice":
        return backend.channel_slice(x, *node.span)
    if k == "concat":
        return backend.concat_channels(x, args[1])
    if k == "add":
        return backend.add_elementwise(x, args[1])
    raise ShapeError(f"unknown node kind {k!r}")


def execute(nodes: Sequence[Node], output: str, x: np.ndarray, weights: Mapping[str, np.ndarray],
            backend: ModuleType = ops, shapes: Optional[Dict[str, tuple]] = None) -> np.ndarray:
    """Run ``nodes`` in order on ``x`` and return the value named ``output``.

    Intermediate values are released after their last consumer. If ``shapes``
    is a dict it receives each node's observed (c, d, h, w) output shape.
    """
    values: Dict[str, np.ndarray] = {INPUT: x}
    last = _last_use(nodes, output)
    for i, node in enumerate(nodes):
        values[node.name] = run_node(node, [values[r] for r in node.inputs], weights, backend)
        if shapes is not None:
            shapes[node.name] = tuple(values[node.name].shape[1:])
        for ref in node.inputs:
            if last.get(ref, -1) <= i and ref != output:
                values.pop(ref, None)
    return values[output]


def zero_weights(nodes: Sequence[Node]) -> Dict[str, np.ndarray]:
    """All convolutions zero, all batch norms identity (gamma 1, var 1, eps as stored)."""
    w: Dict[str, np.ndarray] = {}
    for name, shape in param_shapes(nodes).items():
        fill = 1.0 if name.endswith((".gamma", ".running_var")) else 0.0
        w[name] = np.full(shape, fill, dtype=DTYPE)
    return w
