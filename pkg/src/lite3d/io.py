"""E3DW tensor files.

Layout, all integers little-endian::

    b"E3DW"  u32 version (=1)  u32 tensor_count
    per tensor: u16 name_len, name (UTF-8), u8 rank, u32 dims[rank], float32 data (LE, row-major)

A clip file is the same container holding a single rank-5 tensor.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO, Dict, Mapping, Union

import numpy as np

from .models.model import ModelGraph
from .tensor.types import DTYPE, ShapeError

MAGIC = b"E3DW"
VERSION = 1
CLIP_NAME = "clip"

PathLike = Union[str, Path]


class FormatError(ValueError):
    """Malformed or truncated E3DW data."""


def _read_exact(f: BinaryIO, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"unexpected end of file (wanted {n} bytes, got {len(data)})")
    return data


def write_tensors(f: BinaryIO, tensors: Mapping[str, np.ndarray]) -> None:
    f.write(MAGIC + struct.pack("<II", VERSION, len(tensors)))
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"tensor name too long: {name[:40]}...")
        arr = np.asarray(arr)
        if arr.ndim > 255:
            raise FormatError("rank must fit in one byte")
        f.write(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_tensors(f: BinaryIO) -> Dict[str, np.ndarray]:
    if _read_exact(f, 4) != MAGIC:
        raise FormatError("not an E3DW file (bad magic)")
    version, count = struct.unpack("<II", _read_exact(f, 8))
    if version != VERSION:
        raise FormatError(f"unsupported E3DW version {version}")
    out: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", _read_exact(f, 2))
        name = _read_exact(f, nlen).decode("utf-8")
        (rank,) = struct.unpack("<B", _read_exact(f, 1))
        dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank))
        size = int(np.prod(dims, dtype=np.int64))
        data = np.frombuffer(_read_exact(f, 4 * size), dtype="<f4").astype(DTYPE)
        if name in out:
            raise FormatError(f"duplicate tensor {name!r}")
        out[name] = data.reshape(dims)
    if f.read(1):
        raise FormatError("trailing bytes after the last tensor")
    return out


def save_tensors(path: PathLike, tensors: Mapping[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        write_tensors(f, tensors)


def load_tensors(path: PathLike) -> Dict[str, np.ndarray]:
    with open(path, "rb") as f:
        return read_tensors(f)


def save_weights(path: PathLike, graph: ModelGraph) -> None:
    if not graph.weights:
        raise ValueError("graph has no weights to save")
    # node order, so files from the same graph are byte-identical
    save_tensors(path, {name: graph.weights[name] for name in graph.param_shapes()})


def load_weights(path: PathLike, graph: ModelGraph) -> ModelGraph:
    return graph.with_weights(load_tensors(path))


def save_clip(path: PathLike, clip: np.ndarray) -> None:
    clip = np.asarray(clip, dtype=DTYPE)
    if clip.ndim != 5:
        raise ShapeError(f"clip must be rank 5 (n, c, d, h, w), got {clip.shape}")
    save_tensors(path, {CLIP_NAME: clip})


def load_clip(path: PathLike) -> np.ndarray:
    tensors = load_tensors(path)
    if len(tensors) != 1:
        raise FormatError(f"clip file must hold exactly one tensor, found {len(tensors)}")
    (clip,) = tensors.values()
    if clip.ndim != 5:
        raise FormatError(f"clip tensor must be rank 5, got shape {clip.shape}")
    return clip
