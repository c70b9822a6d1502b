"""Published width multipliers and the channel-scaling rule."""

from __future__ import annotations

import math
from typing import Dict, Tuple

ARCHS = ("squeezenet", "mobilenet_v1", "mobilenet_v2", "shufflenet_v1", "shufflenet_v2")

PUBLISHED_WIDTHS: Dict[str, Tuple[float, ...]] = {
    "squeezenet": (1.0,),
    "mobilenet_v1": (0.5, 1.0, 1.5, 2.0),
    "mobilenet_v2": (0.2, 0.45, 0.7, 1.0),
    "shufflenet_v1": (0.5, 1.0, 1.5, 2.0),
    "shufflenet_v2": (0.25, 0.5, 1.0, 1.5, 2.0),
}

# (c1, c2, c3, c4) per multiplier
SHUFFLENET_V2_CHANNELS: Dict[float, Tuple[int, int, int, int]] = {
    0.25: (32, 64, 128, 1024),
    0.5: (48, 96, 192, 1024),
    1.0: (116, 232, 464, 1024),
    1.5: (176, 352, 704, 1024),
    2.0: (244, 488, 976, 2048),
}

SHUFFLENET_V1_STAGES = (240, 480, 960)  # groups = 3
SHUFFLENET_STEM = 24


class WidthError(ValueError):
    pass


def scale_channels(base: int, width: float, multiple: int = 1) -> int:
    """round(base * width) (halves up), then up to the next multiple of ``multiple``."""
    scaled = max(1, int(math.floor(base * width + 0.5)))
    return int(math.ceil(scaled / multiple)) * multiple


def check_width(arch: str, width: float | None, allow_any: bool = False) -> float:
    if arch not in PUBLISHED_WIDTHS:
        raise WidthError(f"unknown architecture {arch!r}; choose from {', '.join(ARCHS)}")
    if arch == "squeezenet":
        if width not in (None, 1.0):
            raise WidthError("squeezenet has a single fixed configuration (width 1.0)")
        return 1.0
    if width is None:
        return 1.0
    width = float(width)
    if width <= 0:
        raise WidthError(f"width multiplier must be positive, got {width}")
    if not allow_any and not any(math.isclose(width, w) for w in PUBLISHED_WIDTHS[arch]):
        published = ", ".join(f"{w:g}" for w in PUBLISHED_WIDTHS[arch])
        raise WidthError(f"{arch} width {width:g} is not published ({published}); allow_any_width overrides this")
    return width


def shufflenet_v2_channels(width: float) -> Tuple[int, int, int, int]:
    for w, chans in SHUFFLENET_V2_CHANNELS.items():
        if math.isclose(w, width):
            return chans
    c1, c2, c3 = (scale_channels(c, width, 2) for c in SHUFFLENET_V2_CHANNELS[1.0][:3])
    return c1, c2, c3, 2048 if width >= 2.0 else 1024
