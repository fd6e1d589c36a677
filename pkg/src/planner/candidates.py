from typing import Iterable, List, Optional

from cost_models import FpgaModel, fpga_resources
from graph_ops import ceil_div
from model import LayerKind, ModelGraph, Node, PARAMETRIC_KINDS
from .decisions import ChannelSplit, DwSplit, FpgaWhole, GpuOnly, PartitionDecision
from .validation import chain_link, dw_partner


def g_grid(channels: int, extra: Optional[Iterable[int]] = None) -> List[int]:
    """Quarter points of the channel range plus caller values, restricted to 0 < g < channels."""
    grid = {ceil_div(channels, 4), ceil_div(channels, 2), ceil_div(3 * channels, 4)}
    grid.update(extra or ())
    return sorted(g for g in grid if 0 < g < channels)


def fits_alone(graph: ModelGraph, node: Node, fpga_model: FpgaModel) -> bool:
    return (node.spec.kind in PARAMETRIC_KINDS
            and fpga_resources(node.spec, graph.in_shape(node.layer_id)).fits(fpga_model))


def enumerate_candidates(node: Node, graph: ModelGraph, fpga_model: FpgaModel,
                         extra_g: Optional[Iterable[int]] = None) -> List[PartitionDecision]:
    """
    Decisions worth considering for one node, in tie-break order.

    FpgaWhole(own id) opens a fused segment; FpgaWhole(<previous id>) continues the
    segment the previous node belongs to and is only offered when the two form a chain.
    """
    candidates: List[PartitionDecision] = [GpuOnly()]
    spec = node.spec
    layer_id = node.layer_id
    in_shape = graph.in_shape(layer_id)

    if fits_alone(graph, node, fpga_model):
        candidates.append(FpgaWhole(fused_group_id=layer_id))
        i = graph.index(layer_id)
        if i > 0:
            prev = graph.nodes[i - 1]
            if chain_link(graph, prev.layer_id, layer_id) and fits_alone(graph, prev, fpga_model):
                candidates.append(FpgaWhole(fused_group_id=prev.layer_id))

    if spec.kind == LayerKind.CONV and spec.groups == 1:
        for g in g_grid(in_shape.c, extra_g):
            if fpga_resources(spec, in_shape.with_channels(g)).fits(fpga_model):
                candidates.append(ChannelSplit(g=g))

    partner = dw_partner(graph, layer_id)
    if partner is not None:
        pointwise = node if spec.kind == LayerKind.POINTWISE else graph.node(partner)
        if fits_alone(graph, pointwise, fpga_model):
            candidates.append(DwSplit(partner=partner))
    return candidates
