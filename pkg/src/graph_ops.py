"""Graph construction, shape inference and MAC/weight accounting."""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from errors import ModelSemanticError, ShapeError
from model import (INPUT_ID, LayerKind, LayerSpec, ModelGraph, MULTI_INPUT_KINDS, Node,
                   TensorShape)


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def output_extent(size: int, k: int, stride: int, padding: str) -> int:
    if padding == "same":
        return ceil_div(size, stride)
    if k > size:
        raise ShapeError(f"valid padding needs kernel {k} <= input extent {size}")
    return (size - k) // stride + 1


def same_padding(size: int, k: int, stride: int) -> Tuple[int, int]:
    """(before, after) zero padding for `same` mode."""
    out = ceil_div(size, stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def padding_for(spec: LayerSpec, in_shape: TensorShape) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    if spec.padding == "valid":
        return (0, 0), (0, 0)
    return same_padding(in_shape.h, spec.k_h, spec.stride), same_padding(in_shape.w, spec.k_w, spec.stride)


def spatial_out(spec: LayerSpec, in_shape: TensorShape) -> Tuple[int, int]:
    return (output_extent(in_shape.h, spec.k_h, spec.stride, spec.padding),
            output_extent(in_shape.w, spec.k_w, spec.stride, spec.padding))


def node_output_shape(spec: LayerSpec, in_shapes: Sequence[TensorShape]) -> TensorShape:
    """Output shape of one operator; raises ShapeError on inconsistent inputs."""
    kind = spec.kind
    if kind in MULTI_INPUT_KINDS:
        if len(in_shapes) < 2:
            raise ShapeError(f"{kind.value} needs at least 2 inputs, got {len(in_shapes)}")
        first = in_shapes[0]
        if kind == LayerKind.ADD:
            for other in in_shapes[1:]:
                if other != first:
                    raise ShapeError(f"Add input shapes differ: {first} vs {other}")
            return first
        for other in in_shapes[1:]:
            if (other.h, other.w) != (first.h, first.w):
                raise ShapeError(f"Concat spatial dims differ: {first} vs {other}")
        return first.with_channels(sum(s.c for s in in_shapes))

    if len(in_shapes) != 1:
        raise ShapeError(f"{kind.value} takes exactly 1 input, got {len(in_shapes)}")
    x = in_shapes[0]

    if kind == LayerKind.CHANNEL_SPLIT:
        if spec.split >= x.c:
            raise ShapeError(f"ChannelSplit: split={spec.split} must be below input channels {x.c}")
        return x.with_channels(spec.split if spec.part == 0 else x.c - spec.split)
    if kind == LayerKind.CHANNEL_SHUFFLE:
        if x.c % spec.groups:
            raise ShapeError(f"ChannelShuffle: groups={spec.groups} does not divide channels {x.c}")
        return x

    h_o, w_o = spatial_out(spec, x)
    if kind == LayerKind.CONV:
        if x.c % spec.groups:
            raise ShapeError(f"Conv: groups={spec.groups} does not divide input channels {x.c}")
        return TensorShape(h_o, w_o, spec.n)
    if kind == LayerKind.POINTWISE:
        return TensorShape(h_o, w_o, spec.n)
    # depthwise and pools keep channels
    return TensorShape(h_o, w_o, x.c)


def infer_shapes(graph: ModelGraph) -> ModelGraph:
    """Annotate every node with its output shape. Idempotent: recomputes from scratch."""
    shapes: List[TensorShape] = []
    known = {INPUT_ID: graph.input_shape}
    for node in graph.nodes:
        try:
            in_shapes = [known[pred] for pred in node.inputs]
        except KeyError as e:
            raise ModelSemanticError(f"predecessor {e.args[0]!r} is not defined before this node",
                                     field=node.layer_id) from None
        try:
            out = node_output_shape(node.spec, in_shapes)
        except ShapeError as e:
            if e.field is None:
                e.field = node.layer_id
            raise
        known[node.layer_id] = out
        shapes.append(out)
    return graph.with_shapes(tuple(shapes))


def build_graph(input_shape: TensorShape, nodes: Iterable[Node], name: str = "model") -> ModelGraph:
    """
    Validate structure and return a shape-annotated graph in topological order.

    Independent nodes keep the order they were given in.
    """
    nodes = list(nodes)
    order = {}
    for i, node in enumerate(nodes):
        if node.layer_id == INPUT_ID:
            raise ModelSemanticError(f"'{INPUT_ID}' is reserved for the graph input", field=node.layer_id)
        if node.layer_id in order:
            raise ModelSemanticError("duplicate node id", field=node.layer_id)
        order[node.layer_id] = i

    dag = nx.DiGraph()
    dag.add_nodes_from(order)
    for node in nodes:
        if not node.inputs:
            raise ModelSemanticError("node has no predecessors", field=node.layer_id)
        if node.spec.kind in MULTI_INPUT_KINDS and len(node.inputs) < 2:
            raise ModelSemanticError(f"{node.spec.kind.value} needs at least 2 predecessors", field=node.layer_id)
        for pred in node.inputs:
            if pred == INPUT_ID:
                continue
            if pred not in order:
                raise ModelSemanticError(f"undefined predecessor '{pred}'", field=node.layer_id)
            dag.add_edge(pred, node.layer_id)

    if not nx.is_directed_acyclic_graph(dag):
        cycle = nx.find_cycle(dag)
        path = " -> ".join(edge[0] for edge in cycle) + f" -> {cycle[0][0]}"
        raise ModelSemanticError(f"graph has a cycle: {path}", field=cycle[0][0])

    sinks = [layer_id for layer_id in order if dag.out_degree(layer_id) == 0]
    if len(sinks) > 1:
        raise ModelSemanticError(f"graph must have a single output, found {sinks}")

    by_id = {node.layer_id: node for node in nodes}
    topo = nx.lexicographical_topological_sort(dag, key=lambda layer_id: order[layer_id])
    graph = ModelGraph(input_shape=input_shape, nodes=tuple(by_id[i] for i in topo), name=name)
    return infer_shapes(graph)


def mac_count(spec: LayerSpec, in_shape: TensorShape) -> int:
    """Multiply-accumulates of one layer, counting every kernel tap of every output (padded or not)."""
    kind = spec.kind
    if kind not in (LayerKind.CONV, LayerKind.DEPTHWISE, LayerKind.POINTWISE):
        return 0
    h_o, w_o = spatial_out(spec, in_shape)
    if kind == LayerKind.CONV:
        return h_o * w_o * spec.k_h * spec.k_w * (in_shape.c // spec.groups) * spec.n
    if kind == LayerKind.DEPTHWISE:
        return h_o * w_o * spec.k_h * spec.k_w * in_shape.c
    return h_o * w_o * in_shape.c * spec.n


def weight_bytes(spec: LayerSpec, in_shape: TensorShape) -> int:
    """8-bit weight footprint; biases are not modeled."""
    kind = spec.kind
    if kind == LayerKind.CONV:
        return spec.k_h * spec.k_w * (in_shape.c // spec.groups) * spec.n
    if kind == LayerKind.DEPTHWISE:
        return spec.k_h * spec.k_w * in_shape.c
    if kind == LayerKind.POINTWISE:
        return in_shape.c * spec.n
    return 0


def weight_dims(spec: LayerSpec, in_shape: TensorShape) -> Optional[Tuple[int, ...]]:
    """Kernel array dims: (k_h, k_w, C_I/groups, N) for Conv/Pointwise, (k, k, C) for DepthwiseConv."""
    if spec.kind == LayerKind.CONV:
        return spec.k_h, spec.k_w, in_shape.c // spec.groups, spec.n
    if spec.kind == LayerKind.POINTWISE:
        return 1, 1, in_shape.c, spec.n
    if spec.kind == LayerKind.DEPTHWISE:
        return spec.k_h, spec.k_w, in_shape.c
    return None


@dataclass(frozen=True)
class NodeSummary:
    layer_id: str
    kind: str
    in_shape: str
    out_shape: str
    macs: int
    weight_bytes: int


def graph_summary(graph: ModelGraph) -> Tuple[List[NodeSummary], int, int]:
    """Per-node rows plus total MACs and total weight bytes."""
    if not graph.annotated:
        graph = infer_shapes(graph)
    rows = []
    for node in graph.nodes:
        in_shapes = graph.input_shapes(node)
        x = in_shapes[0]
        rows.append(NodeSummary(
            layer_id=node.layer_id,
            kind=node.spec.kind.value,
            in_shape=" + ".join(str(s) for s in in_shapes),
            out_shape=str(graph.shape_of(node.layer_id)),
            macs=mac_count(node.spec, x),
            weight_bytes=weight_bytes(node.spec, x),
        ))
    return rows, sum(r.macs for r in rows), sum(r.weight_bytes for r in rows)
