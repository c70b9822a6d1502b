import dataclasses
import json
from fractions import Fraction

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lite3d import published
from lite3d.analyzer import (CONVENTION, REPORT_SCHEMA, ProfileReport, count_macs, count_params, count_structure,
                             emit_report, infer_shapes, validate_report)
from lite3d.graph import GraphBuilder, Node
from lite3d.models import ARCHS, ModelGraph, build_model
from lite3d.tensor.naive import count_conv_multiplies
from lite3d.tensor.types import ShapeError


def tiny_graph(build, input_shape):
    b = GraphBuilder(input_shape)
    out = build(b)
    return ModelGraph("custom", 1.0, 2, tuple(input_shape), tuple(b.nodes), out)


def test_identity_conv_keeps_shape():
    g = tiny_graph(lambda b: b.conv(b.input, "id", 5, kernel=3, padding=1), (5, 4, 6, 7))
    assert infer_shapes(g)["id"] == (5, 4, 6, 7)


def test_params_closed_form():
    g = tiny_graph(lambda b: b.conv(b.input, "c", 64, kernel=3, padding=1), (3, 4, 4, 4))
    assert count_params(g)["c"] == 5_184 == 3 * 27 * 64


def test_params_include_bias_and_bn_but_not_running_stats():
    def build(b):
        y = b.bn(b.conv(b.input, "c", 8, kernel=1, bias=True), "bn")
        return b.linear(b.global_avgpool(y, "gap"), "fc", 10)

    p = count_params(tiny_graph(build, (4, 2, 2, 2)))
    assert p["c"] == 4 * 8 + 8 and p["bn"] == 16 and p["fc"] == 8 * 10 + 10
    assert p["total"] == 40 + 16 + 90


def test_squeezenet_stem_macs():
    assert count_macs(build_model("squeezenet"))["stem.conv"] == 260_112_384 == 64 * 16 * 56 * 56 * 3 * 27


def test_pointwise_macs_closed_form():
    g = tiny_graph(lambda b: b.conv(b.input, "pw", 116), (116, 4, 14, 14))
    assert count_macs(g)["pw"] == 10_549_504 == 116 * 116 * 784


def test_zero_mac_kinds():
    def build(b):
        y = b.relu(b.bn(b.input, "bn"), "r")
        y = b.maxpool(y, "mp")
        y = b.shuffle(y, "sh", 2)
        left, right = b.slice(y, "l", 0, 2), b.slice(y, "r2", 2, 4)
        return b.add(b.concat(left, right, "cat"), y, "add")

    macs = count_macs(tiny_graph(build, (4, 4, 4, 4)))
    assert macs["total"] == 0


@pytest.mark.parametrize("arch,width", [("shufflenet_v2", 0.25), ("mobilenet_v2", 0.2), ("squeezenet", 1.0)])
def test_macs_match_brute_force_multiply_count(arch, width):
    g = build_model(arch, width, clip=(3, 8, 32, 32))
    shapes, macs = infer_shapes(g), count_macs(g)
    inputs = {n.name: n.inputs[0] for n in g.nodes}
    shapes["input"] = g.input_shape
    for n in g.nodes:
        if n.kind == "conv":
            assert count_conv_multiplies(n.conv, shapes[inputs[n.name]][1:])[0] == macs[n.name], n.name


def test_brute_force_counter_sees_padding():
    from lite3d.tensor.types import ConvSpec

    total, inside = count_conv_multiplies(ConvSpec(1, 1, 3, 1, 1), (1, 1, 1))
    assert (total, inside) == (27, 1)


@given(c=st.integers(1, 64), d=st.integers(1, 8), h=st.integers(1, 16), w=st.integers(1, 16), stride=st.integers(1, 2))
@settings(max_examples=50)
def test_depthwise_separable_saving_is_exact(c, d, h, w, stride):
    def sep(b):
        y = b.conv(b.input, "dw", c, kernel=3, stride=stride, padding=1, groups=c)
        return b.conv(y, "pw", c)

    def std(b):
        return b.conv(b.input, "full", c, kernel=3, stride=stride, padding=1)

    m_sep = count_macs(tiny_graph(sep, (c, d, h, w)))["total"]
    m_std = count_macs(tiny_graph(std, (c, d, h, w)))["total"]
    assert Fraction(m_sep, m_std) == Fraction(1, c) + Fraction(1, 27)


def test_pointwise_params_scale_quadratically_with_width():
    one, two = build_model("mobilenet_v1", 1.0), build_model("mobilenet_v1", 2.0)
    p1, p2 = count_params(one), count_params(two)
    for node in one.nodes:
        if node.kind == "conv" and node.name.endswith(".pw"):
            assert p2[node.name] == 4 * p1[node.name]
        elif node.kind == "conv" and node.name.endswith(".dw"):
            assert p2[node.name] == 2 * p1[node.name]


@pytest.mark.parametrize("arch", ARCHS)
def test_structure_counts(arch):
    assert tuple(count_structure(build_model(arch))) == published.STRUCTURE[arch]


# the depth counts hold at every published width, since scaling never changes topology
@pytest.mark.parametrize("arch,width", [(a, w) for a, ws in [("mobilenet_v2", (0.2, 0.7)), ("shufflenet_v1", (0.5, 2.0)), ("shufflenet_v2", (0.25, 2.0))] for w in ws])
def test_structure_is_width_independent(arch, width):
    assert tuple(count_structure(build_model(arch, width))) == published.STRUCTURE[arch]


def test_inconsistent_graph_is_rejected():
    g = build_model("mobilenet_v1", 0.5)
    nodes = list(g.nodes)
    i = next(k for k, n in enumerate(nodes) if n.name == "block3.pw")
    nodes[i] = dataclasses.replace(nodes[i], inputs=("block1.pw",))
    with pytest.raises(ShapeError):
        infer_shapes(dataclasses.replace(g, nodes=tuple(nodes)))
    dangling = g.nodes + (Node("orphan", "relu", ("stem.conv",)),)
    with pytest.raises(ShapeError):
        infer_shapes(dataclasses.replace(g, nodes=dangling))


# --- report -------------------------------------------------------------------

@pytest.fixture(scope="module")
def report():
    return emit_report(build_model("shufflenet_v2", 2.0))


def test_report_totals_are_column_sums(report):
    assert report.totals["params"] == sum(r["params"] for r in report.layers)
    assert report.totals["macs"] == sum(r["macs"] for r in report.layers)
    assert all(r["macs"] >= 0 for r in report.layers)


def test_report_round_trip_and_schema(report):
    text = report.to_json()
    assert ProfileReport.from_json(text) == report
    assert json.loads(text) == report.to_dict()
    assert list(json.loads(text))[:3] == ["schema_version", "model", "arch"]
    validate_report(json.loads(text))
    jsonschema.Draft202012Validator.check_schema(REPORT_SCHEMA)


def test_report_metadata(report):
    assert report.width == 2.0 and report.channels["c4"] == 2048
    assert report.convention == CONVENTION
    assert report.structure == {"layers": 51, "nonlin": 34, "skips": 16}
    assert report.input_shape == [3, 16, 112, 112]


def test_report_file_round_trip(report, tmp_path):
    report.write(tmp_path / "r.json")
    assert ProfileReport.from_json((tmp_path / "r.json").read_text()) == report


def test_schema_rejects_malformed_reports(report):
    doc = report.to_dict()
    for broken in ({**doc, "totals": {"params": -1, "macs": 0}}, {k: v for k, v in doc.items() if k != "structure"}):
        with pytest.raises(jsonschema.ValidationError):
            validate_report(broken)


def test_reference_comparison_and_discrepancy_table():
    ref = emit_report(build_model("mobilenet_v2", 1.0)).reference
    assert ref["params_within_tolerance"] and ref["macs_within_tolerance"] and ref["discrepancy"] == []
    ref = emit_report(build_model("shufflenet_v1", 0.5)).reference
    assert ref["params_within_tolerance"] and not ref["macs_within_tolerance"]
    table = ref["discrepancy"]
    assert table and sum(r["macs"] for r in table) == count_macs(build_model("shufflenet_v1", 0.5))["total"]
    assert table[0]["name"] == "stem.conv" and table[0]["exceeds_published_mflops"]
    assert abs(sum(r["macs_share"] for r in table) - 1) < 1e-9


def test_reference_only_for_published_configuration():
    assert emit_report(build_model("mobilenet_v2", 1.0, classes=10)).reference is None
    assert emit_report(build_model("mobilenet_v2", 0.3, allow_any_width=True)).reference is None


def test_report_with_bench_section_validates():
    stats = {"batch": 8, "warmup": 0, "iters": 3, "threads": 1, "times_s": [0.5, 0.5, 0.5],
             "cps_mean": 16.0, "cps_median": 16.0, "cps_std": 0.0, "cv": 0.0}
    doc = emit_report(build_model("shufflenet_v2", 0.25), stats).to_dict()
    validate_report(doc)
    assert doc["bench"]["cps_mean"] == 16.0
    assert "bench" not in emit_report(build_model("shufflenet_v2", 0.25)).to_dict()
    assert np.isclose(doc["reference"]["params_m"], 0.83)
