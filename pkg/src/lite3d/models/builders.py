"""Network builders for the five architectures.

Padding follows one rule everywhere: 3x3x3 windows pad 1, 1x1x1 windows pad
0, final pools have no padding. The final pool always covers the whole
remaining volume, so for the default 3x16x112x112 clip it is the 1x4x4 pool
of the published tables.
"""

from __future__ import annotations

from types import MappingProxyType
from typing import Callable, Dict, Optional, Sequence, Tuple

from ..blocks import BlockSpec, emit_block
from ..graph import GraphBuilder
from .model import ModelGraph
from .widths import (
    SHUFFLENET_STEM,
    SHUFFLENET_V1_STAGES,
    WidthError,
    check_width,
    scale_channels,
    shufflenet_v2_channels,
)

DEFAULT_CLIP = (3, 16, 112, 112)
DEFAULT_CLASSES = 600

Act = Callable[[str, str], str]


def _stem(b: GraphBuilder, out_ch: int, six: bool = False) -> str:
    with b.scope("stem"):
        y = b.bn(b.conv(b.input, "conv", out_ch, kernel=3, stride=(1, 2, 2), padding=1), "bn")
        return b.relu6(y, "relu") if six else b.relu(y, "relu")


def _head(b: GraphBuilder, x: str, classes: int) -> str:
    return b.linear(b.global_avgpool(x, "avgpool"), "classifier", classes)


def _squeezenet(b: GraphBuilder, width: float, classes: int) -> Dict:
    x = _stem(b, 64)
    x = b.maxpool(x, "pool1")
    # (squeeze, expand1, expand3) per Fire; bypass on odd-numbered fires
    fires = [(16, 64, 64), (16, 64, 64), (32, 128, 128), (32, 128, 128),
             (48, 192, 192), (48, 192, 192), (64, 256, 256), (64, 256, 256)]
    for i, (s, e1, e3) in enumerate(fires, start=2):
        spec = BlockSpec("fire", b.channels(x), e1 + e3, squeeze_ch=s, expand1_ch=e1, expand3_ch=e3,
                         bypass=i % 2 == 1)
        x = emit_block(b, x, spec, f"fire{i}")
        if i in (3, 5, 7):
            x = b.maxpool(x, f"pool{i // 2 + 1}")
    x = b.relu(b.conv(x, "conv10", classes, bias=True), "conv10_relu")
    b.global_avgpool(x, "avgpool")
    return {}


def _mobilenet_v1(b: GraphBuilder, width: float, classes: int) -> Dict:
    cfg = [(64, 1, 2), (128, 2, 2), (256, 2, 2), (512, 6, 2), (1024, 2, 1)]
    x = _stem(b, scale_channels(32, width))
    i = 1
    for c, n, s in cfg:
        out = scale_channels(c, width)
        for r in range(n):
            spec = BlockSpec("mobilenet_v1", b.channels(x), out, stride=s if r == 0 else 1)
            x = emit_block(b, x, spec, f"block{i}")
            i += 1
    _head(b, x, classes)
    return {"stem": scale_channels(32, width), "last": scale_channels(1024, width)}


def _mobilenet_v2(b: GraphBuilder, width: float, classes: int) -> Dict:
    # expansion t, channels c, repeats n, stride s
    cfg = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2), (6, 96, 3, 1), (6, 160, 3, 2),
           (6, 320, 1, 1)]
    x = _stem(b, scale_channels(32, width), six=True)
    i = 1
    for t, c, n, s in cfg:
        out = scale_channels(c, width)
        for r in range(n):
            spec = BlockSpec("mobilenet_v2", b.channels(x), out, stride=s if r == 0 else 1, expansion=t)
            x = emit_block(b, x, spec, f"block{i}")
            i += 1
    last = scale_channels(1280, width) if width > 1.0 else 1280
    with b.scope("last"):
        x = b.relu6(b.bn(b.conv(x, "conv", last), "bn"), "relu")
    _head(b, x, classes)
    return {"stem": scale_channels(32, width), "last": last}


def _shufflenet_stages(b: GraphBuilder, x: str, stage_ch: Sequence[int], family: str) -> str:
    for si, (ch, repeats) in enumerate(zip(stage_ch, (4, 8, 4)), start=2):
        for r in range(repeats):
            if family == "shufflenet_v1":
                spec = BlockSpec(family, b.channels(x), ch, stride=2 if r == 0 else 1, groups=3,
                                 grouped_first_pointwise=not (si == 2 and r == 0))
            else:
                spec = BlockSpec(family, b.channels(x), ch, stride=2 if r == 0 else 1)
            x = emit_block(b, x, spec, f"stage{si}.{r}")
    return x


def _shufflenet_v1(b: GraphBuilder, width: float, classes: int) -> Dict:
    stages = [scale_channels(c, width, 3) for c in SHUFFLENET_V1_STAGES]
    x = b.maxpool(_stem(b, SHUFFLENET_STEM), "pool1")
    x = _shufflenet_stages(b, x, stages, "shufflenet_v1")
    _head(b, x, classes)
    return {"stem": SHUFFLENET_STEM, "stages": tuple(stages), "groups": 3}


def _shufflenet_v2(b: GraphBuilder, width: float, classes: int) -> Dict:
    c1, c2, c3, c4 = shufflenet_v2_channels(width)
    x = b.maxpool(_stem(b, SHUFFLENET_STEM), "pool1")
    x = _shufflenet_stages(b, x, (c1, c2, c3), "shufflenet_v2")
    with b.scope("last"):
        x = b.relu(b.bn(b.conv(x, "conv", c4), "bn"), "relu")
    _head(b, x, classes)
    return {"stem": SHUFFLENET_STEM, "c1": c1, "c2": c2, "c3": c3, "c4": c4}


_BUILDERS = {
    "squeezenet": _squeezenet,
    "mobilenet_v1": _mobilenet_v1,
    "mobilenet_v2": _mobilenet_v2,
    "shufflenet_v1": _shufflenet_v1,
    "shufflenet_v2": _shufflenet_v2,
}


def build_model(arch: str, width: Optional[float] = 1.0, classes: int = DEFAULT_CLASSES,
                clip: Tuple[int, int, int, int] = DEFAULT_CLIP, allow_any_width: bool = False) -> ModelGraph:
    """Assemble ``arch`` at ``width`` for ``classes`` outputs on (c, d, h, w) clips. No weights yet."""
    arch = arch.lower().replace("-", "_")
    width = check_width(arch, width, allow_any_width)
    if classes < 2:
        raise WidthError(f"classes must be >= 2, got {classes}")
    b = GraphBuilder(clip)
    channels = _BUILDERS[arch](b, width, classes)
    return ModelGraph(
        arch=arch,
        width=width,
        num_classes=classes,
        input_shape=tuple(b.shape(b.input)),
        nodes=tuple(b.nodes),
        output=b.nodes[-1].name,
        blocks=MappingProxyType(dict(b.blocks)),
        channels=MappingProxyType(channels),
    )
