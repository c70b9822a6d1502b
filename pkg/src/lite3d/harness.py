"""Synthetic clips, video-level score aggregation and the throughput benchmark."""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .io import load_clip
from .models.model import ModelGraph, default_threads, forward
from .tensor.ops import softmax
from .tensor.types import DTYPE, ShapeError


def make_clip(shape: Sequence[int], seed: Optional[int] = None, constant: Optional[float] = None,
              path: Union[str, Path, None] = None) -> np.ndarray:
    """A (n, c, d, h, w) float32 clip from exactly one source.

    ``seed`` draws standard normals from PCG64, ``constant`` fills one value,
    ``path`` loads an E3DW clip file whose header must match ``shape``.
    """
    shape = tuple(int(s) for s in shape)
    if len(shape) != 5 or min(shape) < 1:
        raise ShapeError(f"clip shape must be 5 positive dims, got {shape}")
    given = [s is not None for s in (seed, constant, path)]
    if sum(given) != 1:
        raise ValueError("give exactly one of seed, constant, path")
    if path is not None:
        clip = load_clip(path)
        if clip.shape != shape:
            raise ShapeError(f"clip file holds {clip.shape}, expected {shape}")
        return clip
    if constant is not None:
        return np.full(shape, constant, dtype=DTYPE)
    return np.random.Generator(np.random.PCG64(seed)).standard_normal(shape, dtype=DTYPE)


def average_probabilities(probs: Sequence[Sequence[float]]) -> Tuple[int, np.ndarray]:
    """Arithmetic mean of per-clip probability vectors; argmax ties go to the lowest index."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise ValueError("need a non-empty (clips, classes) array")
    mean = p.mean(axis=0)
    return int(np.argmax(mean)), mean


def aggregate_clip_scores(scores: np.ndarray) -> Tuple[int, np.ndarray]:
    """Softmax every row of raw (clips, classes) scores, then average."""
    scores = np.asarray(scores)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError("need a non-empty (clips, classes) score matrix")
    return average_probabilities([softmax(row) for row in scores])


def score_video(graph: ModelGraph, clips: Sequence[np.ndarray], threads: Optional[int] = 1) -> Tuple[int, np.ndarray]:
    """Video label from its clips: per-clip softmax, mean over clips, argmax."""
    if len(clips) == 0:
        raise ValueError("a video needs at least one clip")
    batch = []
    for i, clip in enumerate(clips):
        clip = np.asarray(clip, dtype=DTYPE)
        if clip.ndim == 5 and clip.shape[0] == 1:
            clip = clip[0]
        if tuple(clip.shape) != tuple(graph.input_shape):
            raise ShapeError(f"clip {i} has shape {clip.shape}, model expects {graph.input_shape}")
        batch.append(clip)
    return aggregate_clip_scores(forward(graph, np.stack(batch), threads=threads))


@dataclass
class BenchStats:
    batch: int
    warmup: int
    iters: int
    threads: int
    times_s: List[float]
    cps: List[float] = field(init=False)
    cps_mean: float = field(init=False)
    cps_median: float = field(init=False)
    cps_std: float = field(init=False)
    cv: float = field(init=False)

    def __post_init__(self) -> None:
        if len(self.times_s) < 3:
            raise ValueError("need at least 3 timed iterations")
        if min(self.times_s) <= 0:
            raise ValueError("iteration times must be positive")
        self.cps = [self.batch / t for t in self.times_s]
        self.cps_mean = statistics.fmean(self.cps)
        self.cps_median = statistics.median(self.cps)
        self.cps_std = statistics.stdev(self.cps)
        self.cv = self.cps_std / self.cps_mean

    def to_dict(self) -> dict:
        return asdict(self)


def bench(graph: ModelGraph, batch: int = 8, warmup: int = 3, iters: int = 10, threads: Optional[int] = None,
          clock: Callable[[], float] = time.perf_counter, seed: int = 0,
          clip: Optional[np.ndarray] = None) -> BenchStats:
    """Time ``iters`` forwards of a fixed batch after ``warmup`` untimed ones."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    if iters < 3:
        raise ValueError("iters must be >= 3")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    threads = default_threads() if threads is None else threads
    if clip is None:
        clip = make_clip((batch,) + tuple(graph.input_shape), seed=seed)
    elif tuple(clip.shape) != (batch,) + tuple(graph.input_shape):
        raise ShapeError(f"bench input {clip.shape} does not match batch {batch} x {graph.input_shape}")
    for _ in range(warmup):
        forward(graph, clip, threads=threads)
    times = []
    for _ in range(iters):
        t0 = clock()
        forward(graph, clip, threads=threads)
        times.append(clock() - t0)
    return BenchStats(batch, warmup, iters, threads, times)
