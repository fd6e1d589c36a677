import dataclasses
import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from errors import ModelSemanticError, ModelSyntaxError, ShapeError
from graph_ops import build_graph, graph_summary, infer_shapes, mac_count, same_padding, weight_bytes
from model import LayerSpec, Node, TensorShape
from model_format import load_model, parse_model, serialize_model
from templates.templates_manager import builtin_module, list_templates, parse_builtin_reference

from conftest import GraphBuilder


def window_anchors(size: int, k: int, stride: int, padding: str):
    """Input rows (or columns) a sliding window is anchored at, every `stride` pixels."""
    anchors = []
    for p in range(size):
        if p % stride:
            continue
        if padding == "valid" and p + k > size:
            continue
        anchors.append(p)
    return anchors


def counted_taps(h: int, w: int, k: int, stride: int, padding: str) -> int:
    """Kernel taps visited over every window position, padded taps included."""
    taps = 0
    for _ in window_anchors(h, k, stride, padding):
        for _ in window_anchors(w, k, stride, padding):
            for _ in range(k * k):
                taps += 1
    return taps


def test_mac_count_matches_window_counter_exhaustively():
    for h, w in itertools.product(range(1, 9), repeat=2):
        pointwise_taps = counted_taps(h, w, 1, 1, "same")
        for k, stride, padding in itertools.product((1, 3, 5), (1, 2), ("same", "valid")):
            if padding == "valid" and k > min(h, w):
                continue
            taps = counted_taps(h, w, k, stride, padding)
            for c in range(1, 5):
                shape = TensorShape(h, w, c)
                depthwise = LayerSpec.depthwise(k, stride=stride, padding=padding)
                assert mac_count(depthwise, shape) == taps * c
                pool = LayerSpec.max_pool(k, stride=stride, padding=padding)
                assert mac_count(pool, shape) == 0
                for n in range(1, 5):
                    assert mac_count(LayerSpec.pointwise(n), shape) == pointwise_taps * c * n
                    for groups in (g for g in range(1, 5) if c % g == 0 and n % g == 0):
                        conv = LayerSpec.conv(k, n, stride=stride, padding=padding, groups=groups)
                        assert mac_count(conv, shape) == taps * (c // groups) * n, (h, w, c, k, n, groups)


@given(seed=st.integers(0, 2 ** 16))
def test_infer_shapes_is_idempotent(seed):
    graph = GraphBuilder(np.random.default_rng(seed)).build()
    assert infer_shapes(graph) == graph
    assert infer_shapes(infer_shapes(graph)) == graph
    assert infer_shapes(dataclasses.replace(graph, shapes=None)) == graph


def test_mac_and_weight_formulas():
    x = TensorShape(224, 224, 3)
    assert mac_count(LayerSpec.conv(5, 64), x) == 224 * 224 * 5 * 5 * 3 * 64
    assert weight_bytes(LayerSpec.conv(5, 64), x) == 4800
    assert weight_bytes(LayerSpec.depthwise(3), TensorShape(8, 8, 32)) == 288
    assert mac_count(LayerSpec.max_pool(3), x) == 0


def test_same_padding_splits_the_excess_toward_the_end():
    assert same_padding(8, 3, 1) == (1, 1)
    assert same_padding(8, 4, 1) == (1, 2)
    assert same_padding(7, 3, 2) == (1, 1)
    assert same_padding(8, 1, 2) == (0, 0)


def test_fire_shapes():
    graph = builtin_module("fire")
    assert graph.layer_ids == ["squeeze", "expand1x1", "expand3x3", "concat"]
    assert graph.shape_of("squeeze") == TensorShape(56, 56, 16)
    assert graph.output_shape == TensorShape(56, 56, 128)


def test_parse_model_orders_topologically():
    text = """
    input 8 8 4
    node out Concat <- a b
    node b Pointwise n=2 <- a
    node a Conv k=3 n=4   # first layer
    """
    graph = parse_model(text)
    assert graph.layer_ids == ["a", "b", "out"]
    assert graph.output_shape == TensorShape(8, 8, 6)


def test_serialize_then_parse_is_identity():
    for name in list_templates():
        graph = builtin_module(name)
        assert parse_model(serialize_model(graph)) == graph


def test_fixture_model_matches_template(fixtures_dir):
    assert load_model(fixtures_dir / "models" / "fire.model") == builtin_module("fire")


def test_dangling_predecessor_names_the_node(fixtures_dir):
    with pytest.raises(ModelSemanticError) as info:
        load_model(fixtures_dir / "models" / "dangling_pred.model")
    assert info.value.field == "b"
    assert "missing" in info.value.message
    assert info.value.source.endswith("dangling_pred.model")


def test_cycle_is_rejected(fixtures_dir):
    with pytest.raises(ModelSemanticError, match="cycle"):
        load_model(fixtures_dir / "models" / "cycle.model")


@pytest.mark.parametrize("text, error", [
    ("node a Conv k=3 n=4\ninput 8 8 4", ModelSyntaxError),
    ("input 8 8 4\nnode a Conv n=4", ModelSyntaxError),
    ("input 8 8 4\nnode a Conv k=3 n=4 bogus=1", ModelSyntaxError),
    ("input 8 8 4\nnode a Frobnicate", ModelSemanticError),
    ("input 8 8 4\nnode a Conv k=3 n=4\nnode a Pointwise n=2 <- a", ModelSemanticError),
    ("input 8 8 4\nnode a Conv k=3 n=4\nnode b Conv k=3 n=4", ModelSemanticError),
    ("input 8 8 4\nnode a Pointwise n=4\nnode b Pointwise n=2 <- a\nnode c Add <- a b", ShapeError),
    ("input 8 8 4\nnode a Conv k=9 n=4 padding=valid", ShapeError),
    ("input 8 8 6\nnode a ChannelShuffle groups=4", ShapeError),
])
def test_invalid_documents(text, error):
    with pytest.raises(error):
        parse_model(text)


def test_empty_graph_returns_input_shape():
    graph = build_graph(TensorShape(4, 4, 2), [])
    assert graph.output_shape == TensorShape(4, 4, 2)


def test_channel_split_parts_are_complementary():
    graph = builtin_module("shufflenet_unit", {"c": 10})
    assert graph.shape_of("split_left").c == 5
    assert graph.shape_of("split_right").c == 5
    assert graph.output_shape == TensorShape(28, 28, 10)


def test_builtin_reference_overrides_defaults():
    graph = parse_builtin_reference("builtin:bottleneck:h=8,w=8,c=4,out_channels=4,expansion=2")
    assert graph.input_shape == TensorShape(8, 8, 4)
    assert graph.layer_ids[-1] == "residual"
    with pytest.raises(ModelSemanticError):
        parse_builtin_reference("builtin:fire:depth=3")
    with pytest.raises(ModelSemanticError):
        parse_builtin_reference("builtin:resnet")


def test_graph_summary_totals():
    rows, macs, weights = graph_summary(builtin_module("fire"))
    assert [r.layer_id for r in rows] == ["squeeze", "expand1x1", "expand3x3", "concat"]
    assert macs == 56 * 56 * (96 * 16 + 16 * 64 + 9 * 16 * 64)
    assert weights == 96 * 16 + 16 * 64 + 9 * 16 * 64
    assert rows[-1].in_shape == "56x56x64 + 56x56x64"
