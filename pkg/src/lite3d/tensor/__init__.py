"""Dense 5-D tensors and the primitive operators the networks are built from."""

from .ops import (
    add_elementwise,
    batchnorm_infer,
    channel_shuffle,
    channel_slice,
    channel_split,
    concat_channels,
    conv3d,
    global_avg_pool,
    linear,
    pool3d,
    relu,
    relu6,
    softmax,
)
from .types import (
    DTYPE,
    BatchNormParams,
    ConvSpec,
    PoolSpec,
    ShapeError,
    Tensor5,
    check_tensor5,
    out_extent,
    out_extents,
)

__all__ = [
    "DTYPE", "BatchNormParams", "ConvSpec", "PoolSpec", "ShapeError", "Tensor5", "add_elementwise",
    "batchnorm_infer", "channel_shuffle", "channel_slice", "channel_split", "check_tensor5", "concat_channels",
    "conv3d", "global_avg_pool", "linear", "out_extent", "out_extents", "pool3d", "relu", "relu6", "softmax",
]
