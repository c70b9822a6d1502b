"""Loop-level reference kernels used as oracles for :mod:`lite3d.tensor.ops`.

Each kernel is a literal transcription of the operator's definition: one
scalar accumulator per output element, float32 arithmetic, reduction over
input channels first and then kd, kh, kw. They are compiled with numba so
that randomized equivalence sweeps finish in seconds; the loop structure is
exactly what a pure-Python version would run.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numba
import numpy as np

from .types import DTYPE, BatchNormParams, ConvSpec, PoolSpec, ShapeError, check_tensor5, out_extents


@numba.njit(cache=True)
def _conv_loops(x, w, b, has_bias, groups, stride, padding, out):
    n, cin, d, h, wd = x.shape
    cout, cg, kd, kh, kw = w.shape
    _, _, od, oh, ow = out.shape
    og = cout // groups
    for i in range(n):
        for o in range(cout):
            g = o // og
            for z in range(od):
                for y in range(oh):
                    for q in range(ow):
                        acc = np.float32(0.0)
                        for ci in range(cg):
                            c = g * cg + ci
                            for a in range(kd):
                                zz = z * stride[0] - padding[0] + a
                                if zz < 0 or zz >= d:
                                    continue
                                for e in range(kh):
                                    yy = y * stride[1] - padding[1] + e
                                    if yy < 0 or yy >= h:
                                        continue
                                    for f in range(kw):
                                        qq = q * stride[2] - padding[2] + f
                                        if qq < 0 or qq >= wd:
                                            continue
                                        acc += x[i, c, zz, yy, qq] * w[o, ci, a, e, f]
                        if has_bias:
                            acc += b[o]
                        out[i, o, z, y, q] = acc


@numba.njit(cache=True)
def _pool_loops(x, is_max, kernel, stride, padding, out):
    n, c, d, h, wd = x.shape
    _, _, od, oh, ow = out.shape
    for i in range(n):
        for ch in range(c):
            for z in range(od):
                for y in range(oh):
                    for q in range(ow):
                        best = np.float32(-np.inf)
                        acc = np.float32(0.0)
                        cnt = 0
                        for a in range(kernel[0]):
                            zz = z * stride[0] - padding[0] + a
                            if zz < 0 or zz >= d:
                                continue
                            for e in range(kernel[1]):
                                yy = y * stride[1] - padding[1] + e
                                if yy < 0 or yy >= h:
                                    continue
                                for f in range(kernel[2]):
                                    qq = q * stride[2] - padding[2] + f
                                    if qq < 0 or qq >= wd:
                                        continue
                                    v = x[i, ch, zz, yy, qq]
                                    if v > best:
                                        best = v
                                    acc += v
                                    cnt += 1
                        if is_max:
                            out[i, ch, z, y, q] = best
                        else:
                            out[i, ch, z, y, q] = acc / np.float32(cnt)


@numba.njit(cache=True)
def _bn_loops(x, gamma, beta, mean, var, eps, out):
    n, c, d, h, w = x.shape
    for i in range(n):
        for ch in range(c):
            denom = np.float32(math.sqrt(var[ch] + eps))
            for z in range(d):
                for y in range(h):
                    for q in range(w):
                        out[i, ch, z, y, q] = (x[i, ch, z, y, q] - mean[ch]) / denom * gamma[ch] + beta[ch]


@numba.njit(cache=True)
def _clamp_loops(x, cap, out):
    flat = x.reshape(-1)
    res = out.reshape(-1)
    for k in range(flat.size):
        v = flat[k]
        if v < 0:
            v = np.float32(0.0)
        if cap > 0 and v > cap:
            v = np.float32(cap)
        res[k] = v


@numba.njit(cache=True)
def _shuffle_loops(x, groups, out):
    n, c, d, h, w = x.shape
    per = c // groups
    for i in range(n):
        for a in range(groups):
            for b in range(per):
                src = a * per + b
                dst = b * groups + a
                for z in range(d):
                    for y in range(h):
                        for q in range(w):
                            out[i, dst, z, y, q] = x[i, src, z, y, q]


def conv3d(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray], spec: ConvSpec) -> np.ndarray:
    x = check_tensor5(x)
    weight = np.ascontiguousarray(weight, dtype=DTYPE)
    if x.shape[1] != spec.in_ch or weight.shape != spec.weight_shape:
        raise ShapeError("conv input/weight do not match spec")
    out = np.empty((x.shape[0], spec.out_ch) + out_extents(x.shape[2:], spec.kernel, spec.stride, spec.padding),
                   dtype=DTYPE)
    b = np.zeros(spec.out_ch, DTYPE) if bias is None else np.ascontiguousarray(bias, dtype=DTYPE)
    _conv_loops(x, weight, b, bias is not None, spec.groups,
                np.array(spec.stride, np.int64), np.array(spec.padding, np.int64), out)
    return out


def linear(x: np.ndarray, weight: np.ndarray, bias: Optional[np.ndarray]) -> np.ndarray:
    weight = np.asarray(weight, dtype=DTYPE)
    spec = ConvSpec(weight.shape[1], weight.shape[0], has_bias=bias is not None)
    return conv3d(x, weight.reshape(spec.weight_shape), bias, spec)


def pool3d(x: np.ndarray, spec: PoolSpec) -> np.ndarray:
    x = check_tensor5(x)
    out = np.empty(x.shape[:2] + out_extents(x.shape[2:], spec.kernel, spec.stride, spec.padding), dtype=DTYPE)
    _pool_loops(x, spec.kind == "max", np.array(spec.kernel, np.int64), np.array(spec.stride, np.int64),
                np.array(spec.padding, np.int64), out)
    return out


def batchnorm_infer(x: np.ndarray, p: BatchNormParams) -> np.ndarray:
    x = check_tensor5(x)
    if p.channels != x.shape[1]:
        raise ShapeError("batch-norm channel mismatch")
    out = np.empty_like(x)
    _bn_loops(x, p.gamma, p.beta, p.running_mean, p.running_var, np.float32(p.eps), out)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    x = check_tensor5(x)
    out = np.empty_like(x)
    _clamp_loops(x, np.float32(0.0), out)
    return out


def relu6(x: np.ndarray) -> np.ndarray:
    x = check_tensor5(x)
    out = np.empty_like(x)
    _clamp_loops(x, np.float32(6.0), out)
    return out


def channel_shuffle(x: np.ndarray, groups: int) -> np.ndarray:
    x = check_tensor5(x)
    if x.shape[1] % groups:
        raise ShapeError("channels not divisible by groups")
    out = np.empty_like(x)
    _shuffle_loops(x, groups, out)
    return out


def channel_split(x: np.ndarray, c_first: int) -> Tuple[np.ndarray, np.ndarray]:
    x = check_tensor5(x)
    if not 0 < c_first < x.shape[1]:
        raise ShapeError("split point out of range")
    first = np.empty(x.shape[:1] + (c_first,) + x.shape[2:], DTYPE)
    second = np.empty(x.shape[:1] + (x.shape[1] - c_first,) + x.shape[2:], DTYPE)
    for ch in range(x.shape[1]):
        if ch < c_first:
            first[:, ch] = x[:, ch]
        else:
            second[:, ch - c_first] = x[:, ch]
    return first, second


def channel_slice(x: np.ndarray, start: int, stop: int) -> np.ndarray:
    x = check_tensor5(x)
    if not 0 <= start < stop <= x.shape[1]:
        raise ShapeError("channel range out of bounds")
    out = np.empty(x.shape[:1] + (stop - start,) + x.shape[2:], DTYPE)
    for ch in range(start, stop):
        out[:, ch - start] = x[:, ch]
    return out


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = check_tensor5(a), check_tensor5(b)
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeError("concat shape mismatch")
    out = np.empty((a.shape[0], a.shape[1] + b.shape[1]) + a.shape[2:], DTYPE)
    for ch in range(a.shape[1]):
        out[:, ch] = a[:, ch]
    for ch in range(b.shape[1]):
        out[:, a.shape[1] + ch] = b[:, ch]
    return out


def add_elementwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = check_tensor5(a), check_tensor5(b)
    if a.shape != b.shape:
        raise ShapeError("add shape mismatch")
    out = np.empty_like(a)
    fa, fb, fo = a.reshape(-1), b.reshape(-1), out.reshape(-1)
    for k in range(fa.size):
        fo[k] = fa[k] + fb[k]
    return out


def softmax(scores) -> np.ndarray:
    s = [float(v) for v in np.asarray(scores).reshape(-1)]
    m = max(s)
    e = [math.exp(v - m) for v in s]
    total = math.fsum(e)
    return np.array([v / total for v in e])


@numba.njit(cache=True)
def _count_conv_loops(in_dhw, cout, cg, kernel, stride, padding, out_dhw):
    # walk the exact loop nest of _conv_loops; padded taps multiply a zero and are counted too
    total = 0
    in_bounds = 0
    for o in range(cout):
        for z in range(out_dhw[0]):
            for y in range(out_dhw[1]):
                for q in range(out_dhw[2]):
                    for ci in range(cg):
                        for a in range(kernel[0]):
                            zz = z * stride[0] - padding[0] + a
                            for e in range(kernel[1]):
                                yy = y * stride[1] - padding[1] + e
                                for f in range(kernel[2]):
                                    qq = q * stride[2] - padding[2] + f
                                    total += 1
                                    if 0 <= zz < in_dhw[0] and 0 <= yy < in_dhw[1] and 0 <= qq < in_dhw[2]:
                                        in_bounds += 1
    return total, in_bounds


def count_conv_multiplies(spec: ConvSpec, in_dhw: Tuple[int, int, int]) -> Tuple[int, int]:
    """(all, in-bounds) multiplies the loop kernel performs for one batch item."""
    out_dhw = out_extents(tuple(in_dhw), spec.kernel, spec.stride, spec.padding)
    total, in_bounds = _count_conv_loops(
        np.array(in_dhw, np.int64), spec.out_ch, spec.in_ch // spec.groups, np.array(spec.kernel, np.int64),
        np.array(spec.stride, np.int64), np.array(spec.padding, np.int64), np.array(out_dhw, np.int64))
    return int(total), int(in_bounds)
