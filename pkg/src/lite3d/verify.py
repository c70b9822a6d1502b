"""Randomized equivalence sweep: vectorized kernels vs loop oracles, blocks vs hand-written compositions.

Used by ``lite3d verify`` and the acceptance suite. Errors are measured in the
max norm: ``max|got - want| / max|want|``, with an absolute floor for tensors
that are (near) zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Optional

import numpy as np

from .blocks import BlockSpec, block_param_shapes, run_block
from .tensor import naive, ops
from .tensor.types import DTYPE, BatchNormParams, ConvSpec, PoolSpec

RTOL = 1e-5
ATOL = 1e-6


def max_rel_err(got: np.ndarray, want: np.ndarray) -> float:
    """``max|got - want| / max|want|`` (inf on shape mismatch)."""
    got, want = np.asarray(got, np.float64), np.asarray(want, np.float64)
    if got.shape != want.shape:
        return float("inf")
    if got.size == 0:
        return 0.0
    diff = float(np.max(np.abs(got - want)))
    return diff / max(float(np.max(np.abs(want))), 1e-30) if diff else 0.0


def agrees(got: np.ndarray, want: np.ndarray, rtol: float = RTOL, atol: float = ATOL) -> bool:
    got, want = np.asarray(got, np.float64), np.asarray(want, np.float64)
    if got.shape != want.shape:
        return False
    return got.size == 0 or float(np.max(np.abs(got - want))) <= atol or max_rel_err(got, want) <= rtol


@dataclass
class CheckResult:
    name: str
    cases: int
    max_err: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<24} cases={self.cases:<4d} max_rel_err={self.max_err:.2e}"


def _bn_params(weights: Mapping[str, np.ndarray], prefix: str) -> BatchNormParams:
    return BatchNormParams(weights[f"{prefix}.gamma"], weights[f"{prefix}.beta"],
                           weights[f"{prefix}.running_mean"], weights[f"{prefix}.running_var"], eps=1e-5)


def _conv(x, weights, name, spec):
    return naive.conv3d(x, weights[f"{name}.weight"], None, spec)


def _bn(x, weights, name):
    return naive.batchnorm_infer(x, _bn_params(weights, name))


# Straight-line compositions of loop oracles, one per block family. They are
# written from the block definitions directly and share no code with blocks.py.

def compose_fire(x: np.ndarray, s: BlockSpec, w: Mapping[str, np.ndarray]) -> np.ndarray:
    sq = naive.relu(_bn(_conv(x, w, "squeeze", ConvSpec(s.in_ch, s.squeeze_ch)), w, "squeeze_bn"))
    e1 = _bn(_conv(sq, w, "expand1", ConvSpec(s.squeeze_ch, s.expand1_ch)), w, "expand1_bn")
    e3 = _bn(_conv(sq, w, "expand3", ConvSpec(s.squeeze_ch, s.expand3_ch, 3, 1, 1)), w, "expand3_bn")
    y = naive.concat_channels(e1, e3)
    if s.bypass:
        y = naive.add_elementwise(y, x)
    return naive.relu(y)


def compose_mobilenet_v1(x: np.ndarray, s: BlockSpec, w: Mapping[str, np.ndarray]) -> np.ndarray:
    y = naive.relu(_bn(_conv(x, w, "dw", ConvSpec(s.in_ch, s.in_ch, 3, s.stride, 1, s.in_ch)), w, "dw_bn"))
    return naive.relu(_bn(_conv(y, w, "pw", ConvSpec(s.in_ch, s.out_ch)), w, "pw_bn"))


def compose_mobilenet_v2(x: np.ndarray, s: BlockSpec, w: Mapping[str, np.ndarray]) -> np.ndarray:
    hid = s.in_ch * s.expansion
    y = x
    if s.expansion > 1:
        y = naive.relu6(_bn(_conv(y, w, "expand", ConvSpec(s.in_ch, hid)), w, "expand_bn"))
    y = naive.relu6(_bn(_conv(y, w, "dw", ConvSpec(hid, hid, 3, s.stride, 1, hid)), w, "dw_bn"))
    y = _bn(_conv(y, w, "project", ConvSpec(hid, s.out_ch)), w, "project_bn")
    if s.stride == 1 and s.in_ch == s.out_ch:
        y = naive.add_elementwise(y, x)
    return y


def compose_shufflenet_v1(x: np.ndarray, s: BlockSpec, w: Mapping[str, np.ndarray]) -> np.ndarray:
    g = s.groups
    mid = w["gconv1.weight"].shape[0]
    out = s.out_ch - s.in_ch if s.stride == 2 else s.out_ch
    y = _conv(x, w, "gconv1", ConvSpec(s.in_ch, mid, groups=g if s.grouped_first_pointwise else 1))
    y = naive.channel_shuffle(naive.relu(_bn(y, w, "gconv1_bn")), g)
    y = _bn(_conv(y, w, "dw", ConvSpec(mid, mid, 3, s.stride, 1, mid)), w, "dw_bn")
    y = _bn(_conv(y, w, "gconv2", ConvSpec(mid, out, groups=g)), w, "gconv2_bn")
    if s.stride == 1:
        return naive.relu(naive.add_elementwise(y, x))
    shortcut = naive.pool3d(x, PoolSpec("avg", 3, 2, 1))
    return naive.relu(naive.concat_channels(shortcut, y))


def compose_shufflenet_v2(x: np.ndarray, s: BlockSpec, w: Mapping[str, np.ndarray]) -> np.ndarray:
    half = s.out_ch // 2

    def branch(t, cin, stride):
        t = naive.relu(_bn(_conv(t, w, "right_pw1", ConvSpec(cin, half)), w, "right_pw1_bn"))
        t = _bn(_conv(t, w, "right_dw", ConvSpec(half, half, 3, stride, 1, half)), w, "right_dw_bn")
        return naive.relu(_bn(_conv(t, w, "right_pw2", ConvSpec(half, half)), w, "right_pw2_bn"))

    if s.stride == 1:
        left, right = naive.channel_split(x, half)
        right = branch(right, half, 1)
    else:
        left = _bn(_conv(x, w, "left_dw", ConvSpec(s.in_ch, s.in_ch, 3, 2, 1, s.in_ch)), w, "left_dw_bn")
        left = naive.relu(_bn(_conv(left, w, "left_pw", ConvSpec(s.in_ch, half)), w, "left_pw_bn"))
        right = branch(x, s.in_ch, 2)
    return naive.channel_shuffle(naive.concat_channels(left, right), 2)


COMPOSITIONS: Dict[str, Callable[[np.ndarray, BlockSpec, Mapping[str, np.ndarray]], np.ndarray]] = {
    "fire": compose_fire,
    "mobilenet_v1": compose_mobilenet_v1,
    "mobilenet_v2": compose_mobilenet_v2,
    "shufflenet_v1": compose_shufflenet_v1,
    "shufflenet_v2": compose_shufflenet_v2,
}


def random_weights(shapes: Mapping[str, tuple], rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Random conv weights plus non-trivial batch-norm statistics."""
    w = {}
    for name, shape in shapes.items():
        if name.endswith(".gamma") or name.endswith(".running_var"):
            w[name] = rng.uniform(0.5, 1.5, shape).astype(DTYPE)
        elif name.endswith((".beta", ".running_mean")):
            w[name] = (0.1 * rng.standard_normal(shape)).astype(DTYPE)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) > 1 else 1
            w[name] = (rng.standard_normal(shape) / np.sqrt(fan_in)).astype(DTYPE)
    return w


def random_block_spec(family: str, rng: np.random.Generator) -> BlockSpec:
    r = lambda lo, hi: int(rng.integers(lo, hi + 1))  # noqa: E731
    stride = r(1, 2)
    if family == "fire":
        e1, e3 = r(1, 6), r(1, 6)
        bypass = bool(rng.integers(2))
        return BlockSpec("fire", e1 + e3 if bypass else r(1, 8), e1 + e3, squeeze_ch=r(1, 6),
                         expand1_ch=e1, expand3_ch=e3, bypass=bypass)
    if family == "mobilenet_v1":
        return BlockSpec(family, r(1, 8), r(1, 8), stride=stride)
    if family == "mobilenet_v2":
        c = r(1, 6)
        return BlockSpec(family, c, c if rng.integers(2) else r(1, 8), stride=stride, expansion=r(1, 6))
    if family == "shufflenet_v1":
        g = r(1, 3)
        if stride == 1:
            c = 4 * g * r(1, 2)
            return BlockSpec(family, c, c, stride=1, groups=g)
        cin = g * r(1, 3)
        return BlockSpec(family, cin, cin + 4 * g * r(1, 2), stride=2, groups=g,
                         grouped_first_pointwise=bool(rng.integers(2)))
    if family == "shufflenet_v2":
        c = 2 * r(1, 4)
        return BlockSpec(family, c if stride == 1 else r(1, 8), c, stride=stride)
    raise ValueError(family)


def _rand_x(rng, c, d, h, w, n=1):
    return rng.standard_normal((n, c, d, h, w)).astype(DTYPE)


def _dims(rng, lo=1, hi=8):
    return [int(v) for v in rng.integers(lo, hi + 1, 3)]


def _primitive_cases(rng: np.random.Generator) -> Dict[str, Callable[[], tuple]]:
    """Each entry draws one random case and returns (vectorized result, oracle result)."""

    def conv_case(mode):
        def case():
            c = int(rng.integers(1, 9))
            if mode == "g1":
                g, oc = 1, int(rng.integers(1, 9))
            elif mode == "g2":
                c = 2 * int(rng.integers(1, 5))
                g, oc = 2, 2 * int(rng.integers(1, 5))
            else:
                g, oc = c, c
            k = int(rng.choice([1, 3]))
            s = int(rng.integers(1, 3))
            spec = ConvSpec(c, oc, k, s, 1 if k == 3 else 0, g, bool(rng.integers(2)))
            x = _rand_x(rng, c, *_dims(rng), n=int(rng.integers(1, 3)))
            wt = rng.standard_normal(spec.weight_shape).astype(DTYPE)
            b = rng.standard_normal(oc).astype(DTYPE) if spec.has_bias else None
            return ops.conv3d(x, wt, b, spec), naive.conv3d(x, wt, b, spec)
        return case

    def pool_case(kind):
        def case():
            k = int(rng.choice([1, 2, 3]))
            spec = PoolSpec(kind, k, int(rng.integers(1, 3)), int(rng.integers(0, k // 2 + 1)))
            x = _rand_x(rng, int(rng.integers(1, 9)), *_dims(rng, max(1, k - 2 * spec.padding[0])))
            return ops.pool3d(x, spec), naive.pool3d(x, spec)
        return case

    def bn_case():
        c = int(rng.integers(1, 9))
        x = _rand_x(rng, c, *_dims(rng))
        p = BatchNormParams(rng.uniform(0.5, 2, c), rng.standard_normal(c), rng.standard_normal(c),
                            rng.uniform(0.1, 2, c), eps=float(rng.choice([0.0, 1e-5, 1e-3])))
        return ops.batchnorm_infer(x, p), naive.batchnorm_infer(x, p)

    def act_case(name):
        def case():
            x = (4 * _rand_x(rng, int(rng.integers(1, 9)), *_dims(rng))).astype(DTYPE)
            return getattr(ops, name)(x), getattr(naive, name)(x)
        return case

    def shuffle_case():
        g = int(rng.integers(1, 5))
        x = _rand_x(rng, g * int(rng.integers(1, 3)), *_dims(rng))
        return ops.channel_shuffle(x, g), naive.channel_shuffle(x, g)

    def split_case():
        c = int(rng.integers(2, 9))
        k = int(rng.integers(1, c))
        x = _rand_x(rng, c, *_dims(rng))
        a, b = ops.channel_split(x, k)
        na, nb = naive.channel_split(x, k)
        return np.concatenate([a.ravel(), b.ravel()]), np.concatenate([na.ravel(), nb.ravel()])

    def concat_case():
        dims = _dims(rng)
        a, b = _rand_x(rng, int(rng.integers(1, 9)), *dims), _rand_x(rng, int(rng.integers(1, 9)), *dims)
        return ops.concat_channels(a, b), naive.concat_channels(a, b)

    def add_case():
        dims = _dims(rng)
        c = int(rng.integers(1, 9))
        a, b = _rand_x(rng, c, *dims), _rand_x(rng, c, *dims)
        return ops.add_elementwise(a, b), naive.add_elementwise(a, b)

    def linear_case():
        cin, cout = int(rng.integers(1, 65)), int(rng.integers(2, 65))
        x = _rand_x(rng, cin, 1, 1, 1, n=int(rng.integers(1, 4)))
        wt = rng.standard_normal((cout, cin)).astype(DTYPE)
        b = rng.standard_normal(cout).astype(DTYPE)
        return ops.linear(x, wt, b), naive.linear(x, wt, b)

    def softmax_case():
        s = 10 * rng.standard_normal(int(rng.integers(1, 50)))
        return ops.softmax(s), naive.softmax(s)

    return {
        "conv3d[g=1]": conv_case("g1"),
        "conv3d[g=2]": conv_case("g2"),
        "conv3d[g=c]": conv_case("dw"),
        "pool3d[max]": pool_case("max"),
        "pool3d[avg]": pool_case("avg"),
        "batchnorm_infer": bn_case,
        "relu": act_case("relu"),
        "relu6": act_case("relu6"),
        "channel_shuffle": shuffle_case,
        "channel_split": split_case,
        "concat_channels": concat_case,
        "add_elementwise": add_case,
        "linear": linear_case,
        "softmax": softmax_case,
    }


def check_block_family(family: str, cases: int, rng: np.random.Generator) -> CheckResult:
    worst, ok = 0.0, True
    for _ in range(cases):
        spec = random_block_spec(family, rng)
        dims = _dims(rng, 1, 6)
        x = _rand_x(rng, spec.in_ch, *dims)
        w = random_weights(block_param_shapes(spec, tuple(dims)), rng)
        got, want = run_block(x, spec, w), COMPOSITIONS[family](x, spec, w)
        worst = max(worst, max_rel_err(got, want))
        ok = ok and agrees(got, want)
    return CheckResult(f"block[{family}]", cases, worst, ok)


def run_suite(cases: int = 200, block_cases: Optional[int] = None, seed: int = 0,
              only: Optional[Iterable[str]] = None) -> List[CheckResult]:
    """Every primitive against its oracle ``cases`` times, every block family ``block_cases`` times."""
    rng = np.random.default_rng(seed)
    block_cases = max(1, cases // 4) if block_cases is None else block_cases
    wanted = set(only) if only is not None else None
    results = []
    for name, case in _primitive_cases(rng).items():
        if wanted is not None and name not in wanted:
            continue
        worst, ok = 0.0, True
        for _ in range(cases):
            got, want = case()
            worst = max(worst, max_rel_err(got, want))
            ok = ok and agrees(got, want)
        results.append(CheckResult(name, cases, worst, ok))
    for family in COMPOSITIONS:
        if wanted is not None and f"block[{family}]" not in wanted:
            continue
        results.append(check_block_family(family, block_cases, rng))
    return results
