"""Static analysis of a model graph: shapes, parameters, multiply-adds, structure, JSON report.

Nothing here touches weights or runs tensor math; every figure follows from
the node list and the input shape.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

from . import published
from .graph import ACTIVATIONS, CONV_KINDS, INPUT, JUNCTIONS, Node, node_output_shape
from .models.model import ModelGraph
from .tensor.types import ShapeError

CONVENTION = (
    "macs: multiply-adds of conv and linear layers for one clip "
    "(out_volume * out_ch * in_ch/groups * kd*kh*kw); pooling, batch norm, activations, shuffle, "
    "slice, add and concat count 0. params: conv/linear weights and biases plus batch-norm gamma and beta; "
    "running statistics excluded. layers: conv/linear layers on the longest input-to-output path. "
    "nonlin: ReLU/ReLU6 applications on that path. skips: add/concat junctions whose inputs "
    "differ in layer depth."
)

SCHEMA_VERSION = 1

REPORT_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "lite3d profile report",
    "type": "object",
    "required": ["schema_version", "model", "arch", "width", "classes", "input_shape", "convention",
                 "totals", "structure", "layers"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "model": {"type": "string"},
        "arch": {"type": "string"},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "classes": {"type": "integer", "minimum": 2},
        "input_shape": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 4, "maxItems": 4},
        "convention": {"type": "string"},
        "channels": {"type": "object"},
        "totals": {
            "type": "object",
            "required": ["params", "macs"],
            "properties": {
                "params": {"type": "integer", "minimum": 0},
                "macs": {"type": "integer", "minimum": 0},
                "bn_params": {"type": "integer", "minimum": 0},
            },
        },
        "structure": {
            "type": "object",
            "required": ["layers", "nonlin", "skips"],
            "properties": {k: {"type": "integer", "minimum": 0} for k in ("layers", "nonlin", "skips")},
        },
        "layers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "kind", "shape", "params", "macs"],
                "properties": {
                    "name": {"type": "string"},
                    "kind": {"type": "string"},
                    "shape": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                    "params": {"type": "integer", "minimum": 0},
                    "macs": {"type": "integer", "minimum": 0},
                },
            },
        },
        "reference": {
            "type": ["object", "null"],
            "required": ["mflops", "params_m", "params_rel_err", "macs_rel_err", "params_within_tolerance",
                         "macs_within_tolerance", "discrepancy"],
        },
        "bench": {
            "type": "object",
            "required": ["batch", "warmup", "iters", "threads", "times_s", "cps_mean", "cps_median", "cps_std"],
            "properties": {
                "batch": {"type": "integer", "minimum": 1},
                "warmup": {"type": "integer", "minimum": 0},
                "iters": {"type": "integer", "minimum": 3},
                "threads": {"type": "integer", "minimum": 1},
                "times_s": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 3},
                "cps_mean": {"type": "number"},
                "cps_median": {"type": "number"},
                "cps_std": {"type": "number", "minimum": 0},
                "cv": {"type": "number", "minimum": 0},
            },
        },
    },
}


class Structure(NamedTuple):
    layers: int
    nonlinearities: int
    skip_connections: int


def infer_shapes(graph: ModelGraph) -> Dict[str, tuple]:
    """(c, d, h, w) of every node output, derived symbolically. Validates wiring."""
    shapes: Dict[str, tuple] = {INPUT: tuple(graph.input_shape)}
    consumed = set()
    for node in graph.nodes:
        for ref in node.inputs:
            if ref not in shapes:
                raise ShapeError(f"{node.name}: input {ref!r} is undefined or defined later")
            consumed.add(ref)
        if node.name in shapes:
            raise ShapeError(f"duplicate node {node.name!r}")
        shapes[node.name] = node_output_shape(node, [shapes[r] for r in node.inputs])
    dangling = [n.name for n in graph.nodes if n.name not in consumed and n.name != graph.output]
    if dangling or graph.output not in shapes:
        raise ShapeError(f"graph must have a single sink {graph.output!r}; dangling: {dangling[:5]}")
    del shapes[INPUT]
    return shapes


def block_output_shapes(graph: ModelGraph) -> Dict[str, tuple]:
    shapes = infer_shapes(graph)
    return {block: shapes[node] for block, node in graph.block_outputs().items()}


def node_params(node: Node) -> int:
    if node.kind == "conv":
        return math.prod(node.conv.weight_shape) + (node.conv.out_ch if node.conv.has_bias else 0)
    if node.kind == "linear":
        return node.conv.in_ch * node.conv.out_ch + (node.conv.out_ch if node.conv.has_bias else 0)
    if node.kind == "bn":
        return 2 * node.channels
    return 0


def node_macs(node: Node, out_shape: tuple) -> int:
    if node.kind == "conv":
        return math.prod(out_shape[1:]) * node.conv.out_ch * node.conv.fan_in
    if node.kind == "linear":
        return node.conv.in_ch * node.conv.out_ch
    return 0


def count_params(graph: ModelGraph) -> Dict[str, int]:
    """Learnable parameters per node; key ``"total"`` holds the sum."""
    per = {n.name: node_params(n) for n in graph.nodes}
    per["total"] = sum(per.values())
    return per


def count_macs(graph: ModelGraph) -> Dict[str, int]:
    """Multiply-adds per node for a single clip; key ``"total"`` holds the sum."""
    shapes = infer_shapes(graph)
    per = {n.name: node_macs(n, shapes[n.name]) for n in graph.nodes}
    per["total"] = sum(per.values())
    return per


def count_structure(graph: ModelGraph) -> Structure:
    # (conv/linear layers, activations) along the deepest path to each value, compared lexicographically
    depth: Dict[str, tuple] = {INPUT: (0, 0)}
    skips = 0
    for node in graph.nodes:
        incoming = [depth[r] for r in node.inputs]
        if node.kind in JUNCTIONS and len({d[0] for d in incoming}) > 1:
            skips += 1
        layers, acts = max(incoming)
        depth[node.name] = (layers + (node.kind in CONV_KINDS), acts + (node.kind in ACTIVATIONS))
    layers, acts = depth[graph.output]
    return Structure(layers, acts, skips)


@dataclass
class ProfileReport:
    model: str
    arch: str
    width: float
    classes: int
    input_shape: List[int]
    convention: str
    channels: Dict[str, Any]
    totals: Dict[str, int]
    structure: Dict[str, int]
    layers: List[Dict[str, Any]]
    reference: Optional[Dict[str, Any]] = None
    bench: Optional[Dict[str, Any]] = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        d = {"schema_version": self.schema_version}
        d.update({k: v for k, v in asdict(self).items() if k != "schema_version"})
        if d["bench"] is None:
            del d["bench"]
        return d

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ProfileReport":
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ProfileReport":
        return cls.from_dict(json.loads(text))

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json() + "\n")


def _jsonable(v: Any) -> Any:
    if isinstance(v, tuple):
        return [_jsonable(i) for i in v]
    return v


def compare_published(graph: ModelGraph, params: Dict[str, int], macs: Dict[str, int]) -> Optional[Dict[str, Any]]:
    """Relative errors against the published row for this configuration, if there is one.

    When either figure falls outside its tolerance, every conv/linear/bn node is
    listed with its parameter and multiply-add share so the gap can be traced.
    """
    if tuple(graph.input_shape) != (3, 16, 112, 112) or graph.num_classes != 600:
        return None
    row = published.lookup(graph.arch, graph.width)
    if row is None:
        return None
    p_err = params["total"] / (row.params_m * 1e6) - 1.0
    m_err = macs["total"] / (row.mflops * 1e6) - 1.0
    p_ok = abs(p_err) <= published.PARAMS_TOLERANCE
    m_ok = abs(m_err) <= published.MACS_TOLERANCE
    table = []
    if not (p_ok and m_ok):
        cum = 0
        for node in graph.nodes:
            if params[node.name] == 0 and macs[node.name] == 0:
                continue
            cum += macs[node.name]
            table.append({
                "name": node.name,
                "kind": node.kind,
                "params": params[node.name],
                "macs": macs[node.name],
                "macs_share": macs[node.name] / macs["total"],
                "cumulative_mflops": cum / 1e6,
                "exceeds_published_mflops": cum > row.mflops * 1e6,
            })
    return {
        "mflops": row.mflops,
        "params_m": row.params_m,
        "params_rel_err": p_err,
        "macs_rel_err": m_err,
        "params_tolerance": published.PARAMS_TOLERANCE,
        "macs_tolerance": published.MACS_TOLERANCE,
        "params_within_tolerance": p_ok,
        "macs_within_tolerance": m_ok,
        "discrepancy": table,
    }


def emit_report(graph: ModelGraph, bench_stats: Any = None) -> ProfileReport:
    shapes = infer_shapes(graph)
    params = count_params(graph)
    macs = count_macs(graph)
    s = count_structure(graph)
    bn = sum(params[n.name] for n in graph.nodes if n.kind == "bn")
    layers = [{"name": n.name, "kind": n.kind, "shape": list(shapes[n.name]),
               "params": params[n.name], "macs": macs[n.name]} for n in graph.nodes]
    bench = None
    if bench_stats is not None:
        bench = bench_stats.to_dict() if hasattr(bench_stats, "to_dict") else dict(bench_stats)
    return ProfileReport(
        model=graph.name,
        arch=graph.arch,
        width=graph.width,
        classes=graph.num_classes,
        input_shape=list(graph.input_shape),
        convention=CONVENTION,
        channels={k: _jsonable(v) for k, v in graph.channels.items()},
        totals={"params": params["total"], "macs": macs["total"], "bn_params": bn},
        structure={"layers": s.layers, "nonlin": s.nonlinearities, "skips": s.skip_connections},
        layers=layers,
        reference=compare_published(graph, params, macs),
        bench=bench,
    )


def validate_report(doc: Dict[str, Any]) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not follow :data:`REPORT_SCHEMA`."""
    import jsonschema

    jsonschema.validate(doc, REPORT_SCHEMA)
