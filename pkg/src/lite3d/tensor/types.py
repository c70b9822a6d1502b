"""Value types shared by every operator: 5-D tensors, convolution/pool specs, BN params."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np

Triple = Tuple[int, int, int]
IntOrTriple = Union[int, Tuple[int, int, int]]

# A Tensor5 is a float32 ndarray of shape (n, c, d, h, w). No wrapper class:
# numpy already provides the contiguous row-major storage the format calls for.
Tensor5 = np.ndarray

DTYPE = np.float32


class ShapeError(ValueError):
    """Raised on any shape, channel or divisibility mismatch."""


def triple(v: IntOrTriple, name: str = "value") -> Triple:
    if isinstance(v, (int, np.integer)):
        return (int(v),) * 3
    t = tuple(int(i) for i in v)
    if len(t) != 3:
        raise ShapeError(f"{name} must be an int or a 3-tuple, got {v!r}")
    return t  # type: ignore[return-value]


def check_tensor5(x: np.ndarray, name: str = "input") -> np.ndarray:
    """Validate a rank-5 float32 tensor with all dims >= 1; returns it C-contiguous."""
    if not isinstance(x, np.ndarray):
        raise TypeError(f"{name} must be a numpy array, got {type(x).__name__}")
    if x.ndim != 5:
        raise ShapeError(f"{name} must be rank 5 (n, c, d, h, w), got shape {x.shape}")
    if min(x.shape) < 1:
        raise ShapeError(f"{name} has an empty dimension: {x.shape}")
    if x.dtype != DTYPE:
        raise TypeError(f"{name} must be float32, got {x.dtype}")
    return np.ascontiguousarray(x)


def out_extent(size: int, k: int, s: int, p: int) -> int:
    """Output length of one convolution/pool axis: floor((size + 2p - k) / s) + 1."""
    if s < 1:
        raise ShapeError(f"stride must be >= 1, got {s}")
    if k < 1 or p < 0:
        raise ShapeError(f"invalid kernel/padding ({k}, {p})")
    if size + 2 * p < k:
        raise ShapeError(f"window {k} does not fit extent {size} with padding {p}")
    out = (size + 2 * p - k) // s + 1
    if out < 1:
        raise ShapeError(f"non-positive output extent for ({size}, {k}, {s}, {p})")
    return out


def out_extents(dhw: Triple, kernel: Triple, stride: Triple, padding: Triple) -> Triple:
    return tuple(out_extent(*a) for a in zip(dhw, kernel, stride, padding))  # type: ignore[return-value]


@dataclass(frozen=True)
class ConvSpec:
    """One 3-D convolution. ``groups == in_ch == out_ch`` is a depthwise conv."""

    in_ch: int
    out_ch: int
    kernel: IntOrTriple = 1
    stride: IntOrTriple = 1
    padding: IntOrTriple = 0
    groups: int = 1
    has_bias: bool = False

    def __post_init__(self) -> None:
        for name in ("kernel", "stride", "padding"):
            object.__setattr__(self, name, triple(getattr(self, name), name))
        if self.in_ch < 1 or self.out_ch < 1 or self.groups < 1:
            raise ShapeError(f"channel counts and groups must be positive: {self}")
        if self.in_ch % self.groups or self.out_ch % self.groups:
            raise ShapeError(
                f"in_ch={self.in_ch} and out_ch={self.out_ch} must both be divisible by groups={self.groups}"
            )
        if min(self.kernel) < 1 or min(self.stride) < 1 or min(self.padding) < 0:
            raise ShapeError(f"invalid kernel/stride/padding: {self}")

    @property
    def depthwise(self) -> bool:
        return self.groups == self.in_ch == self.out_ch

    @property
    def weight_shape(self) -> tuple:
        return (self.out_ch, self.in_ch // self.groups) + tuple(self.kernel)

    @property
    def fan_in(self) -> int:
        kd, kh, kw = self.kernel
        return (self.in_ch // self.groups) * kd * kh * kw

    def output_shape(self, in_shape: tuple) -> tuple:
        """(c, d, h, w) -> (out_ch, d', h', w')."""
        c, *dhw = in_shape
        if c != self.in_ch:
            raise ShapeError(f"conv expects {self.in_ch} input channels, got {c}")
        return (self.out_ch,) + out_extents(tuple(dhw), self.kernel, self.stride, self.padding)


@dataclass(frozen=True)
class PoolSpec:
    kind: str  # "max" | "avg"
    kernel: IntOrTriple = 3
    stride: IntOrTriple = 1
    padding: IntOrTriple = 0

    def __post_init__(self) -> None:
        if self.kind not in ("max", "avg"):
            raise ShapeError(f"pool kind must be 'max' or 'avg', got {self.kind!r}")
        for name in ("kernel", "stride", "padding"):
            object.__setattr__(self, name, triple(getattr(self, name), name))
        if any(p * 2 > k for p, k in zip(self.padding, self.kernel)):
            # every window must overlap real data, otherwise max is -inf and avg divides by 0
            raise ShapeError(f"padding larger than half the window: {self}")

    def output_shape(self, in_shape: tuple) -> tuple:
        c, *dhw = in_shape
        return (c,) + out_extents(tuple(dhw), self.kernel, self.stride, self.padding)


@dataclass(frozen=True)
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    channels: int = field(init=False)

    def __post_init__(self) -> None:
        vecs = [np.asarray(v, dtype=DTYPE).reshape(-1) for v in
                (self.gamma, self.beta, self.running_mean, self.running_var)]
        if len({v.size for v in vecs}) != 1:
            raise ShapeError("batch-norm vectors must all have the same length")
        if np.any(vecs[3] < 0):
            raise ValueError("running_var must be non-negative")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        for name, v in zip(("gamma", "beta", "running_mean", "running_var"), vecs):
            object.__setattr__(self, name, v)
        object.__setattr__(self, "channels", vecs[0].size)

    @classmethod
    def identity(cls, c: int, eps: float = 0.0) -> "BatchNormParams":
        return cls(np.ones(c), np.zeros(c), np.zeros(c), np.ones(c), eps)
