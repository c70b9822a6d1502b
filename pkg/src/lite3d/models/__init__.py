"""Builders, weight initialization and the forward pass for the five networks."""

from .builders import DEFAULT_CLASSES, DEFAULT_CLIP, build_model
from .init import init_weights
from .model import Junction, ModelGraph, default_threads, forward
from .widths import ARCHS, PUBLISHED_WIDTHS, SHUFFLENET_V2_CHANNELS, WidthError, scale_channels

__all__ = [
    "ARCHS", "DEFAULT_CLASSES", "DEFAULT_CLIP", "Junction", "ModelGraph", "PUBLISHED_WIDTHS",
    "SHUFFLENET_V2_CHANNELS", "WidthError", "build_model", "default_threads", "forward", "init_weights",
    "scale_channels",
]
