"""Vectorized operators. Each has a loop-level twin in :mod:`lite3d.tensor.naive`.

Every operator works on one batch item at a time so an item's result never
depends on what else is in the batch; callers may therefore split a batch
across threads without changing a single bit of the output.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .types import DTYPE, BatchNormParams, ConvSpec, PoolSpec, ShapeError, check_tensor5, out_extents


def _pad(x: np.ndarray, padding, value: float = 0.0) -> np.ndarray:
    """Pad the spatial axes of a (c, d, h, w) array."""
    pd, ph, pw = padding
    if not (pd or ph or pw):
        return x
    return np.pad(x, ((0, 0), (pd, pd), (ph, ph), (pw, pw)), mode="constant", constant_values=value)


def _window(xp: np.ndarray, offset, stride, out_dhw) -> np.ndarray:
    """Strided view of ``xp`` (c, D, H, W) picking the element at ``offset`` of every window."""
    (a, b, c), (sd, sh, sw), (od, oh, ow) = offset, stride, out_dhw
    return xp[:, a:a + sd * (od - 1) + 1:sd, b:b + sh * (oh - 1) + 1:sh, c:c + sw * (ow - 1) + 1:sw]


def _im2col(xp: np.ndarray, spec: ConvSpec, out_dhw) -> np.ndarray:
    """(c, D, H, W) -> (c, kd*kh*kw, od*oh*ow), rows ordered channel-major then kd, kh, kw."""
    kd, kh, kw = spec.kernel
    c = xp.shape[0]
    cols = np.empty((c, kd, kh, kw) + tuple(out_dhw), dtype=DTYPE)
    for a in range(kd):
        for b in range(kh):
            for e in range(kw):
                cols[:, a, b, e] = _window(xp, (a, b, e), spec.stride, out_dhw)
    return cols.reshape(c, kd * kh * kw, -1)


def _conv_item(x: np.ndarray, weight: np.ndarray, spec: ConvSpec, out_dhw) -> np.ndarray:
    c = x.shape[0]
    npos = int(np.prod(out_dhw))
    pointwise = spec.kernel == (1, 1, 1) and spec.stride == (1, 1, 1) and spec.padding == (0, 0, 0)
    if spec.depthwise:
        # shift-and-accumulate, one term per kernel tap in fixed (kd, kh, kw) order
        xp = _pad(x, spec.padding)
        w = weight.reshape(c, -1)
        out = np.zeros((c,) + tuple(out_dhw), dtype=DTYPE)
        tmp = np.empty_like(out)
        kd, kh, kw = spec.kernel
        tap = 0
        for a in range(kd):
            for b in range(kh):
                for e in range(kw):
                    np.multiply(_window(xp, (a, b, e), spec.stride, out_dhw), w[:, tap, None, None, None], out=tmp)
                    out += tmp
                    tap += 1
        return out
    if pointwise:
        cols = x.reshape(c, 1, npos)
    else:
        cols = _im2col(_pad(x, spec.padding), spec, out_dhw)
    g = spec.groups
    og = spec.out_ch // g
    if g == 1:
        out = weight.reshape(spec.out_ch, -1) @ cols.reshape(-1, npos)
    else:
        out = np.matmul(weight.reshape(g, og, -1), cols.reshape(g, -1, npos))
    return out.reshape((spec.out_ch,) + tuple(out_dhw))


def conv3d(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray], spec: ConvSpec) -> np.ndarray:
    """Grouped 3-D convolution with zero padding.

    ``weight`` has shape ``(out_ch, in_ch // groups, kd, kh, kw)``. Dispatches to a
    depthwise shift-and-accumulate kernel, a plain matmul for 1x1x1 convs, or
    im2col + (batched) matmul for everything else.
    """
    x = check_tensor5(x)
    if x.shape[1] != spec.in_ch:
        raise ShapeError(f"conv expects {spec.in_ch} input channels, got {x.shape[1]}")
    weight = np.asarray(weight, dtype=DTYPE)
    if weight.shape != spec.weight_shape:
        raise ShapeError(f"weight shape {weight.shape} does not match spec {spec.weight_shape}")
    if spec.has_bias != (bias is not None):
        raise ShapeError("bias presence does not match spec.has_bias")
    out_dhw = out_extents(x.shape[2:], spec.kernel, spec.stride, spec.padding)
    out = np.empty((x.shape[0], spec.out_ch) + out_dhw, dtype=DTYPE)
    for i in range(x.shape[0]):
        out[i] = _conv_item(x[i], weight, spec, out_dhw)
    if bias is not None:
        bias = np.asarray(bias, dtype=DTYPE)
        if bias.shape != (spec.out_ch,):
            raise ShapeError(f"bias shape {bias.shape} != ({spec.out_ch},)")
        out += bias[None, :, None, None, None]
    return out


def linear(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray]) -> np.ndarray:
    """Fully connected layer on (n, c, 1, 1, 1) features; returns (n, out, 1, 1, 1)."""
    x = check_tensor5(x)
    if x.shape[2:] != (1, 1, 1):
        raise ShapeError(f"linear expects pooled (n, c, 1, 1, 1) input, got {x.shape}")
    weight = np.asarray(weight, dtype=DTYPE)
    if weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise ShapeError(f"linear weight {weight.shape} incompatible with {x.shape[1]} features")
    out = np.empty((x.shape[0], weight.shape[0]), dtype=DTYPE)
    for i in range(x.shape[0]):
        out[i] = weight @ x[i, :, 0, 0, 0]
    if bias is not None:
        out += np.asarray(bias, dtype=DTYPE)
    return out.reshape(out.shape + (1, 1, 1))


def pool3d(x: np.ndarray, spec: PoolSpec) -> np.ndarray:
    """Max or average pooling. Padding never contributes: -inf for max, excluded from the avg divisor."""
    x = check_tensor5(x)
    out_dhw = out_extents(x.shape[2:], spec.kernel, spec.stride, spec.padding)
    kd, kh, kw = spec.kernel
    out = np.empty(x.shape[:2] + out_dhw, dtype=DTYPE)
    if spec.kind == "avg":
        ones = _pad(np.ones((1,) + x.shape[2:], dtype=DTYPE), spec.padding)
        count = np.zeros((1,) + out_dhw, dtype=DTYPE)
        for a in range(kd):
            for b in range(kh):
                for e in range(kw):
                    count += _window(ones, (a, b, e), spec.stride, out_dhw)
    for i in range(x.shape[0]):
        xp = _pad(x[i], spec.padding, -np.inf if spec.kind == "max" else 0.0)
        acc = None
        for a in range(kd):
            for b in range(kh):
                for e in range(kw):
                    win = _window(xp, (a, b, e), spec.stride, out_dhw)
                    if acc is None:
                        acc = win.copy()
                    elif spec.kind == "max":
                        np.maximum(acc, win, out=acc)
                    else:
                        acc += win
        out[i] = acc if spec.kind == "max" else acc / count
    return out


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    x = check_tensor5(x)
    return pool3d(x, PoolSpec("avg", kernel=x.shape[2:], stride=1, padding=0))


def batchnorm_infer(x: np.ndarray, p: BatchNormParams) -> np.ndarray:
    """Inference-mode batch norm using running statistics."""
    x = check_tensor5(x)
    if p.channels != x.shape[1]:
        raise ShapeError(f"batch-norm has {p.channels} channels, input has {x.shape[1]}")
    scale = p.gamma / np.sqrt(p.running_var + DTYPE(p.eps))
    shift = p.beta - p.running_mean * scale
    return (x * scale[None, :, None, None, None] + shift[None, :, None, None, None]).astype(DTYPE, copy=False)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(check_tensor5(x), DTYPE(0))


def relu6(x: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(check_tensor5(x), DTYPE(0)), DTYPE(6))


def channel_shuffle(x: np.ndarray, groups: int) -> np.ndarray:
    """View channels as (groups, c // groups), transpose, flatten."""
    x = check_tensor5(x)
    n, c, d, h, w = x.shape
    if groups < 1 or c % groups:
        raise ShapeError(f"{c} channels not divisible into {groups} groups")
    return np.ascontiguousarray(
        x.reshape(n, groups, c // groups, d, h, w).transpose(0, 2, 1, 3, 4, 5)
    ).reshape(n, c, d, h, w)


def channel_slice(x: np.ndarray, start: int, stop: int) -> np.ndarray:
    x = check_tensor5(x)
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError(f"channel range [{start}, {stop}) outside 0..{x.shape[1]}")
    return np.ascontiguousarray(x[:, start:stop])


def channel_split(x: np.ndarray, c_first: int) -> Tuple[np.ndarray, np.ndarray]:
    x = check_tensor5(x)
    if not 0 < c_first < x.shape[1]:
        raise ShapeError(f"split point {c_first} must lie strictly inside 0..{x.shape[1]}")
    return channel_slice(x, 0, c_first), channel_slice(x, c_first, x.shape[1])


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = check_tensor5(a, "a"), check_tensor5(b, "b")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} along channels")
    return np.concatenate([a, b], axis=1)


def add_elementwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = check_tensor5(a, "a"), check_tensor5(b, "b")
    if a.shape != b.shape:
        raise ShapeError(f"cannot add {a.shape} and {b.shape}")
    return a + b


def softmax(scores) -> np.ndarray:
    """Max-shifted softmax of a score vector, computed in float64."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if s.size == 0 or not np.all(np.isfinite(s)):
        raise ValueError("softmax needs a non-empty finite vector")
    e = np.exp(s - s.max())
    return e / e.sum()
