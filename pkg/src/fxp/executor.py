"""
Graph and plan execution over 8-bit tensors.

`execute_graph` is the single-device reference. `execute_plan` follows the partition:
FPGA-resident convolutions run through the line-buffer kernels in `fxp.stream`, the
GPU side through `fxp.kernels`, and channel splits recombine their two partial
accumulators before requantizing. Both must agree bit for bit.
"""

from typing import Dict, Mapping, Optional

import numpy as np

from errors import FxpError
from graph_ops import weight_dims
from model import LayerKind, ModelGraph, Node
from planner.decisions import ChannelSplit, DwSplit, FpgaWhole, PartitionPlan
from planner.validation import check_plan_structure
from . import kernels
from .stream import stream_conv2d, stream_conv_accumulate, stream_depthwise_conv2d
from .tensor import DEFAULT_FRACTION_BITS, FxpKernel, FxpTensor, PartialOfm

WeightStore = Mapping[str, FxpKernel]


def _weights(store: WeightStore, node: Node) -> FxpKernel:
    try:
        return store[node.layer_id]
    except KeyError:
        raise FxpError("no weights for this layer", field=node.layer_id) from None


def _run_gpu(node: Node, inputs, store: WeightStore) -> FxpTensor:
    spec = node.spec
    kind = spec.kind
    x = inputs[0]
    if kind in (LayerKind.CONV, LayerKind.POINTWISE):
        return kernels.conv2d(x, _weights(store, node), spec)
    if kind == LayerKind.DEPTHWISE:
        return kernels.depthwise_conv2d(x, _weights(store, node), spec)
    if kind == LayerKind.MAX_POOL:
        return kernels.max_pool2d(x, spec)
    if kind == LayerKind.AVG_POOL:
        return kernels.avg_pool2d(x, spec)
    if kind == LayerKind.CONCAT:
        return kernels.concat(inputs)
    if kind == LayerKind.ADD:
        return kernels.add(inputs)
    if kind == LayerKind.CHANNEL_SPLIT:
        return kernels.channel_split(x, spec.split, spec.part)
    return kernels.channel_shuffle(x, spec.groups)


def _run_fpga(node: Node, x: FxpTensor, store: WeightStore) -> FxpTensor:
    if node.spec.kind == LayerKind.DEPTHWISE:
        return stream_depthwise_conv2d(x, _weights(store, node), node.spec)
    return stream_conv2d(x, _weights(store, node), node.spec)


def _run_split(node: Node, x: FxpTensor, store: WeightStore, g: int) -> FxpTensor:
    (gpu_ifm, gpu_kernel), (fpga_ifm, fpga_kernel) = kernels.split_operands(x, _weights(store, node), node.spec, g)
    f = x.fraction_bits
    gpu_part = PartialOfm(kernels.conv_accumulate(gpu_ifm, gpu_kernel, node.spec), f)
    fpga_part = PartialOfm(stream_conv_accumulate(fpga_ifm, fpga_kernel, node.spec), f)
    return kernels.combine_partials((gpu_part, fpga_part))


def _check_input(graph: ModelGraph, x: FxpTensor):
    if x.shape != graph.input_shape:
        raise FxpError(f"input tensor is {x.shape}, graph '{graph.name}' expects {graph.input_shape}", field="input")


def _evaluate(graph: ModelGraph, x: FxpTensor, run) -> Dict[str, FxpTensor]:
    values: Dict[str, FxpTensor] = {"input": x}
    for node in graph.nodes:
        inputs = [values[pred] for pred in node.inputs]
        try:
            out = run(node, inputs)
        except FxpError as e:
            if e.field is None:
                e.field = node.layer_id
            raise
        expected = graph.shape_of(node.layer_id)
        if out.shape != expected:
            raise FxpError(f"produced {out.shape}, expected {expected}", field=node.layer_id)
        values[node.layer_id] = out
    return values


def execute_graph_trace(graph: ModelGraph, x: FxpTensor, store: WeightStore) -> Dict[str, FxpTensor]:
    """Every intermediate tensor, keyed by layer id (`input` included)."""
    _check_input(graph, x)
    return _evaluate(graph, x, lambda node, inputs: _run_gpu(node, inputs, store))


def execute_plan_trace(graph: ModelGraph, plan: PartitionPlan, x: FxpTensor,
                       store: WeightStore) -> Dict[str, FxpTensor]:
    check_plan_structure(graph, plan)
    _check_input(graph, x)

    def run(node: Node, inputs):
        decision = plan.decisions[node.layer_id]
        if isinstance(decision, FpgaWhole):
            # fusion keeps intermediates on chip; arithmetic is per layer either way
            return _run_fpga(node, inputs[0], store)
        if isinstance(decision, ChannelSplit):
            return _run_split(node, inputs[0], store, decision.g)
        if isinstance(decision, DwSplit) and node.spec.kind == LayerKind.POINTWISE:
            return _run_fpga(node, inputs[0], store)
        return _run_gpu(node, inputs, store)

    return _evaluate(graph, x, run)


def execute_graph(graph: ModelGraph, x: FxpTensor, store: WeightStore) -> FxpTensor:
    return execute_graph_trace(graph, x, store)[graph.output_id or "input"]


def execute_plan(graph: ModelGraph, plan: PartitionPlan, x: FxpTensor, store: WeightStore) -> FxpTensor:
    return execute_plan_trace(graph, plan, x, store)[graph.output_id or "input"]


def random_tensor(shape, rng: np.random.Generator, fraction_bits: int = DEFAULT_FRACTION_BITS) -> FxpTensor:
    values = rng.integers(-128, 128, size=(shape.h, shape.w, shape.c), dtype=np.int8)
    return FxpTensor(values, fraction_bits)


def random_weight_store(graph: ModelGraph, rng: np.random.Generator,
                        fraction_bits: int = DEFAULT_FRACTION_BITS) -> Dict[str, FxpKernel]:
    """Uniform int8 weights for every parametric layer, drawn in topological order."""
    store = {}
    for node in graph.nodes:
        dims = weight_dims(node.spec, graph.in_shape(node.layer_id))
        if dims is not None:
            store[node.layer_id] = FxpKernel(rng.integers(-128, 128, size=dims, dtype=np.int8), fraction_bits)
    return store


def first_mismatch(expected: Dict[str, FxpTensor], actual: Dict[str, FxpTensor],
                   order) -> Optional[tuple]:
    """(layer_id, (y, x, c), expected value, actual value) of the first differing element, or None."""
    for layer_id in order:
        a, b = expected[layer_id], actual[layer_id]
        if a == b:
            continue
        if a.values.shape != b.values.shape:
            return layer_id, None, a.shape, b.shape
        index = tuple(int(i) for i in np.argwhere(a.values != b.values)[0])
        return layer_id, index, int(a.values[index]), int(b.values[index])
    return None
