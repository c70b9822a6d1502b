"""The five block families: Fire, MobileNet, inverted residual, ShuffleNet v1 and v2 units.

Each family is written once, as an emitter that appends primitive nodes to a
:class:`~lite3d.graph.GraphBuilder`. Model builders inline these emitters; the
tensor-level functions (``fire_block`` and friends) build a one-block graph
and execute it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Tuple

import numpy as np

from .graph import GraphBuilder, Node, execute, param_shapes
from .tensor.types import ShapeError, check_tensor5

FAMILIES = ("fire", "mobilenet_v1", "mobilenet_v2", "shufflenet_v1", "shufflenet_v2")


def round_to_multiple(value: float, multiple: int) -> int:
    """Nearest positive multiple of ``multiple`` (halves round up)."""
    return max(multiple, int(value / multiple + 0.5) * multiple)


@dataclass(frozen=True)
class BlockSpec:
    family: str
    in_ch: int
    out_ch: int
    stride: int = 1
    # fire
    squeeze_ch: int = 0
    expand1_ch: int = 0
    expand3_ch: int = 0
    bypass: bool = False
    # mobilenet_v2
    expansion: int = 1
    # shufflenet_v1
    groups: int = 3
    grouped_first_pointwise: bool = True

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ShapeError(f"unknown block family {self.family!r}")
        if self.stride not in (1, 2):
            raise ShapeError(f"block stride must be 1 or 2, got {self.stride}")
        if self.in_ch < 1 or self.out_ch < 1:
            raise ShapeError("channel counts must be positive")
        f = self.family
        if f == "fire":
            if self.stride != 1:
                raise ShapeError("fire blocks do not downsample")
            if self.squeeze_ch < 1 or self.expand1_ch + self.expand3_ch != self.out_ch:
                raise ShapeError("fire: expand1_ch + expand3_ch must equal out_ch")
            if self.bypass and self.in_ch != self.out_ch:
                raise ShapeError("fire bypass needs in_ch == out_ch")
        elif f == "mobilenet_v2":
            if self.expansion < 1:
                raise ShapeError("expansion ratio must be >= 1")
        elif f == "shufflenet_v1":
            g = self.groups
            if self.stride == 1 and self.in_ch != self.out_ch:
                raise ShapeError("shufflenet_v1 stride-1 unit needs in_ch == out_ch")
            if self.stride == 2 and self.branch_ch < 1:
                raise ShapeError("shufflenet_v1 stride-2 unit needs out_ch > in_ch")
            if self.branch_ch % g or (self.grouped_first_pointwise and self.in_ch % g):
                raise ShapeError(f"shufflenet_v1 channels must be divisible by groups={g}")
        elif f == "shufflenet_v2":
            if self.out_ch % 2:
                raise ShapeError("shufflenet_v2 out_ch must be even")
            if self.stride == 1 and self.in_ch != self.out_ch:
                raise ShapeError("shufflenet_v2 stride-1 unit needs in_ch == out_ch")

    @property
    def residual(self) -> bool:
        """True when the block ends in an identity add (mobilenet_v2 only)."""
        return self.family == "mobilenet_v2" and self.stride == 1 and self.in_ch == self.out_ch

    @property
    def bottleneck_ch(self) -> int:
        """ShuffleNet v1 bottleneck width: out_ch / 4 rounded to a multiple of the group count."""
        return round_to_multiple(self.out_ch / 4, self.groups)

    @property
    def branch_ch(self) -> int:
        """Channels produced by the ShuffleNet v1 conv branch (concat with the shortcut restores out_ch)."""
        return self.out_ch - self.in_ch if self.stride == 2 else self.out_ch


def _fire(b: GraphBuilder, x: str, s: BlockSpec) -> str:
    sq = b.relu(b.bn(b.conv(x, "squeeze", s.squeeze_ch), "squeeze_bn"), "squeeze_relu")
    e1 = b.bn(b.conv(sq, "expand1", s.expand1_ch), "expand1_bn")
    e3 = b.bn(b.conv(sq, "expand3", s.expand3_ch, kernel=3, padding=1), "expand3_bn")
    out = b.concat(e1, e3, "concat")
    if s.bypass:
        out = b.add(out, x, "bypass")
    return b.relu(out, "relu")


def _mobilenet_v1(b: GraphBuilder, x: str, s: BlockSpec) -> str:
    y = b.conv(x, "dw", s.in_ch, kernel=3, stride=s.stride, padding=1, groups=s.in_ch)
    y = b.relu(b.bn(y, "dw_bn"), "dw_relu")
    y = b.bn(b.conv(y, "pw", s.out_ch), "pw_bn")
    return b.relu(y, "pw_relu")


def _mobilenet_v2(b: GraphBuilder, x: str, s: BlockSpec) -> str:
    y = x
    hidden = s.in_ch * s.expansion
    if s.expansion > 1:
        y = b.relu6(b.bn(b.conv(y, "expand", hidden), "expand_bn"), "expand_relu")
    y = b.conv(y, "dw", hidden, kernel=3, stride=s.stride, padding=1, groups=hidden)
    y = b.relu6(b.bn(y, "dw_bn"), "dw_relu")
    y = b.bn(b.conv(y, "project", s.out_ch), "project_bn")
    if s.residual:
        y = b.add(y, x, "residual")
    return y


def _shufflenet_v1(b: GraphBuilder, x: str, s: BlockSpec) -> str:
    mid, g = s.bottleneck_ch, s.groups
    y = b.conv(x, "gconv1", mid, groups=g if s.grouped_first_pointwise else 1)
    y = b.relu(b.bn(y, "gconv1_bn"), "gconv1_relu")
    y = b.shuffle(y, "shuffle", g)
    y = b.bn(b.conv(y, "dw", mid, kernel=3, stride=s.stride, padding=1, groups=mid), "dw_bn")
    y = b.bn(b.conv(y, "gconv2", s.branch_ch, groups=g), "gconv2_bn")
    if s.stride == 1:
        y = b.add(y, x, "residual")
    else:
        shortcut = b.avgpool(x, "shortcut", kernel=3, stride=2, padding=1)
        y = b.concat(shortcut, y, "concat")
    return b.relu(y, "relu")


def _shufflenet_v2_branch(b: GraphBuilder, x: str, prefix: str, ch: int, stride: int) -> str:
    y = b.relu(b.bn(b.conv(x, f"{prefix}_pw1", ch), f"{prefix}_pw1_bn"), f"{prefix}_pw1_relu")
    y = b.bn(b.conv(y, f"{prefix}_dw", ch, kernel=3, stride=stride, padding=1, groups=ch), f"{prefix}_dw_bn")
    return b.relu(b.bn(b.conv(y, f"{prefix}_pw2", ch), f"{prefix}_pw2_bn"), f"{prefix}_pw2_relu")


def _shufflenet_v2(b: GraphBuilder, x: str, s: BlockSpec) -> str:
    half = s.out_ch // 2
    if s.stride == 1:
        left = b.slice(x, "split_left", 0, half)
        right = b.slice(x, "split_right", half, s.in_ch)
        right = _shufflenet_v2_branch(b, right, "right", half, 1)
    else:
        left = b.conv(x, "left_dw", s.in_ch, kernel=3, stride=2, padding=1, groups=s.in_ch)
        left = b.bn(left, "left_dw_bn")
        left = b.relu(b.bn(b.conv(left, "left_pw", half), "left_pw_bn"), "left_pw_relu")
        right = _shufflenet_v2_branch(b, x, "right", half, 2)
    return b.shuffle(b.concat(left, right, "concat"), "shuffle", 2)


EMITTERS: Dict[str, Callable[[GraphBuilder, str, BlockSpec], str]] = {
    "fire": _fire,
    "mobilenet_v1": _mobilenet_v1,
    "mobilenet_v2": _mobilenet_v2,
    "shufflenet_v1": _shufflenet_v1,
    "shufflenet_v2": _shufflenet_v2,
}


def emit_block(b: GraphBuilder, x: str, spec: BlockSpec, name: str) -> str:
    """Append one block under scope ``name``; returns the name of its output value."""
    if b.channels(x) != spec.in_ch:
        raise ShapeError(f"{name}: block expects {spec.in_ch} input channels, got {b.channels(x)}")
    with b.scope(name, block=spec):
        return EMITTERS[spec.family](b, x, spec)


def block_graph(spec: BlockSpec, dhw: Tuple[int, int, int]) -> Tuple[Tuple[Node, ...], str]:
    """Primitive nodes of a single block applied to a (spec.in_ch, *dhw) input."""
    b = GraphBuilder((spec.in_ch,) + tuple(dhw))
    out = emit_block(b, b.input, spec, "block")
    return tuple(b.nodes), out


def block_param_shapes(spec: BlockSpec, dhw: Tuple[int, int, int] = (1, 1, 1)) -> Dict[str, tuple]:
    """Weight tensor names (relative to the block, e.g. ``squeeze.weight``) and shapes."""
    nodes, _ = block_graph(spec, dhw)
    return {k.removeprefix("block."): v for k, v in param_shapes(nodes).items()}


def run_block(x: np.ndarray, spec: BlockSpec, weights: Mapping[str, np.ndarray]) -> np.ndarray:
    x = check_tensor5(x)
    nodes, out = block_graph(spec, x.shape[2:])
    scoped = {f"block.{k}": v for k, v in weights.items()}
    return execute(nodes, out, x, scoped)


def _family_runner(family: str) -> Callable[[np.ndarray, BlockSpec, Mapping[str, np.ndarray]], np.ndarray]:
    def run(x: np.ndarray, spec: BlockSpec, weights: Mapping[str, np.ndarray]) -> np.ndarray:
        if spec.family != family:
            raise ShapeError(f"expected a {family} spec, got {spec.family}")
        return run_block(x, spec, weights)

    run.__name__ = f"{family}_block"
    run.__doc__ = f"Apply one {family} block; ``weights`` is keyed as in :func:`block_param_shapes`."
    return run


fire_block = _family_runner("fire")
mobilenet_v1_block = _family_runner("mobilenet_v1")
mobilenet_v2_block = _family_runner("mobilenet_v2")
shufflenet_v1_unit = _family_runner("shufflenet_v1")
shufflenet_v2_unit = _family_runner("shufflenet_v2")
