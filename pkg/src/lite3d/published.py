"""Reference figures reported for the 3-D networks (numbers only, used for comparison)."""

from __future__ import annotations

from typing import Dict, NamedTuple, Optional, Tuple


class Row(NamedTuple):
    mflops: float
    params_m: float
    titan_xp_cps: int
    jetson_tx2_cps: int


# (arch, width) -> complexity/speed row, 600 classes, 3x16x112x112 input, batch 8 for speed
COMPLEXITY: Dict[Tuple[str, float], Row] = {
    ("shufflenet_v1", 0.5): Row(42, 0.55, 398, 69),
    ("shufflenet_v2", 0.25): Row(42, 0.83, 442, 82),
    ("mobilenet_v1", 0.5): Row(46, 1.17, 290, 57),
    ("mobilenet_v2", 0.2): Row(42, 0.96, 357, 42),
    ("shufflenet_v1", 1.0): Row(125, 1.52, 269, 49),
    ("shufflenet_v2", 1.0): Row(119, 1.91, 243, 44),
    ("mobilenet_v1", 1.0): Row(137, 3.91, 164, 31),
    ("mobilenet_v2", 0.45): Row(126, 1.40, 203, 19),
    ("shufflenet_v1", 1.5): Row(235, 2.92, 204, 31),
    ("shufflenet_v2", 1.5): Row(215, 3.16, 186, 34),
    ("mobilenet_v1", 1.5): Row(273, 8.22, 116, 19),
    ("mobilenet_v2", 0.7): Row(245, 2.05, 130, 13),
    ("shufflenet_v1", 2.0): Row(393, 4.78, 161, 24),
    ("shufflenet_v2", 2.0): Row(360, 6.64, 146, 26),
    ("mobilenet_v1", 2.0): Row(454, 14.10, 88, 15),
    ("mobilenet_v2", 1.0): Row(446, 3.12, 93, 9),
    ("squeezenet", 1.0): Row(728, 2.15, 682, 46),
}

# arch -> (layers, non-linearities, skip connections)
STRUCTURE: Dict[str, Tuple[int, int, int]] = {
    "squeezenet": (18, 18, 4),
    "shufflenet_v1": (50, 33, 16),
    "shufflenet_v2": (51, 34, 16),
    "mobilenet_v1": (28, 27, 0),
    "mobilenet_v2": (53, 35, 10),
}

PARAMS_TOLERANCE = 0.05
MACS_TOLERANCE = 0.25


def lookup(arch: str, width: float) -> Optional[Row]:
    for (a, w), row in COMPLEXITY.items():
        if a == arch and abs(w - width) < 1e-9:
            return row
    return None
