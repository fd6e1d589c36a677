from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional

from cost_models import FpgaModel, FpgaResources, fpga_resources
from errors import PlanError
from model import LayerKind, ModelGraph, PARAMETRIC_KINDS
from .decisions import ChannelSplit, DwSplit, FpgaWhole, GpuOnly, PartitionDecision, PartitionPlan, ResourceUsage


def chain_link(graph: ModelGraph, prev_id: str, layer_id: str) -> bool:
    """True when `layer_id` directly continues a chain ending at `prev_id`: adjacent in order,
    sole consumer and sole input."""
    if not graph.has_node(prev_id) or graph.index(layer_id) != graph.index(prev_id) + 1:
        return False
    return graph.node(layer_id).inputs == (prev_id,) and graph.consumers[prev_id] == (layer_id,)


def dw_partner(graph: ModelGraph, layer_id: str) -> Optional[str]:
    """The other half of a depthwise -> pointwise pair, if `layer_id` belongs to one."""
    i = graph.index(layer_id)
    kind = graph.nodes[i].spec.kind
    if kind == LayerKind.DEPTHWISE and i + 1 < len(graph.nodes):
        nxt = graph.nodes[i + 1]
        if nxt.spec.kind == LayerKind.POINTWISE and chain_link(graph, layer_id, nxt.layer_id):
            return nxt.layer_id
    if kind == LayerKind.POINTWISE and i > 0:
        prev = graph.nodes[i - 1]
        if prev.spec.kind == LayerKind.DEPTHWISE and chain_link(graph, prev.layer_id, layer_id):
            return prev.layer_id
    return None


def check_plan_structure(graph: ModelGraph, plan: PartitionPlan):
    """Raise PlanError unless every decision is well formed for `graph`."""
    for layer_id in plan.decisions:
        if not graph.has_node(layer_id):
            raise PlanError("decision for a node that is not in the graph", field=layer_id)
    missing = [layer_id for layer_id in graph.layer_ids if layer_id not in plan.decisions]
    if missing:
        raise PlanError(f"no decision for nodes {missing}", field=missing[0])

    for i, node in enumerate(graph.nodes):
        decision = plan.decisions[node.layer_id]
        spec = node.spec
        if isinstance(decision, FpgaWhole):
            if spec.kind not in PARAMETRIC_KINDS:
                raise PlanError(f"{spec.kind.value} layers are not mapped to the FPGA", field=node.layer_id)
            gid = decision.fused_group_id
            if gid == node.layer_id:
                continue
            prev = graph.nodes[i - 1].layer_id if i > 0 else None
            prev_decision = plan.decisions.get(prev)
            if not (isinstance(prev_decision, FpgaWhole) and prev_decision.fused_group_id == gid):
                raise PlanError(f"fused group '{gid}' is not contiguous at this node", field=node.layer_id)
            if not chain_link(graph, prev, node.layer_id):
                raise PlanError(f"fused group '{gid}' is not a chain: '{prev}' must be the only input "
                                f"of this node and this node its only consumer", field=node.layer_id)
        elif isinstance(decision, ChannelSplit):
            c = graph.in_shape(node.layer_id).c
            if spec.kind != LayerKind.CONV or spec.groups != 1:
                raise PlanError("ChannelSplit applies to ungrouped Conv layers only", field=node.layer_id)
            if not 0 < decision.g < c:
                raise PlanError(f"split g={decision.g} must satisfy 0 < g < {c}", field=node.layer_id)
        elif isinstance(decision, DwSplit):
            partner = dw_partner(graph, node.layer_id)
            if partner is None or partner != decision.partner:
                raise PlanError(f"DwSplit partner '{decision.partner}' is not the adjacent "
                                f"depthwise/pointwise layer", field=node.layer_id)
            other = plan.decisions[partner]
            if not (isinstance(other, DwSplit) and other.partner == node.layer_id):
                raise PlanError(f"DwSplit must be recorded on both '{node.layer_id}' and '{partner}'",
                                field=node.layer_id)


def decision_resources(graph: ModelGraph, layer_id: str, decision: PartitionDecision) -> FpgaResources:
    """FPGA resources one decision occupies."""
    spec = graph.node(layer_id).spec
    in_shape = graph.in_shape(layer_id)
    if isinstance(decision, FpgaWhole):
        return fpga_resources(spec, in_shape)
    if isinstance(decision, ChannelSplit):
        return fpga_resources(spec, in_shape.with_channels(decision.g))
    if isinstance(decision, DwSplit) and spec.kind == LayerKind.POINTWISE:
        return fpga_resources(spec, in_shape)
    return FpgaResources()


def plan_resources(graph: ModelGraph, decisions: Dict[str, PartitionDecision]) -> ResourceUsage:
    usage = ResourceUsage()
    for layer_id, decision in decisions.items():
        r = decision_resources(graph, layer_id, decision)
        usage = usage + ResourceUsage(macs=r.macs, weight_bytes=r.weight_bytes, buffer_bytes=r.buffer_bytes)
    return usage


def fpga_mapped_count(graph: ModelGraph, decisions: Mapping[str, PartitionDecision]) -> int:
    return sum(1 for layer_id, d in decisions.items() if decision_resources(graph, layer_id, d).macs > 0)


@dataclass(frozen=True)
class PlanVerdict:
    feasible: bool
    resource_usage: ResourceUsage
    violations: List[str]


def validate_plan(graph: ModelGraph, plan: PartitionPlan, fpga_model: FpgaModel) -> PlanVerdict:
    """Structural check, then the global resource budget: every mapped layer is resident at once."""
    check_plan_structure(graph, plan)
    usage = plan_resources(graph, plan.decisions)
    violations = []
    if usage.macs > fpga_model.mac_budget:
        violations.append(f"{usage.macs} multipliers exceed the budget of {fpga_model.mac_budget}")
    if usage.memory_bytes > fpga_model.memory_budget_bytes:
        violations.append(f"{usage.memory_bytes} bytes of weights and line buffers exceed "
                          f"the budget of {fpga_model.memory_budget_bytes}")
    return PlanVerdict(feasible=not violations, resource_usage=usage, violations=violations)


def canonical_decisions(graph: ModelGraph, decisions: Mapping[str, PartitionDecision]) -> Dict[str, PartitionDecision]:
    """
    Record a GPU depthwise feeding a lone FPGA pointwise as the equivalent DwSplit pair.

    Both spellings cost and compute the same; this keeps a single representative.
    """
    result = dict(decisions)
    for i, node in enumerate(graph.nodes):
        if node.spec.kind != LayerKind.POINTWISE:
            continue
        partner = dw_partner(graph, node.layer_id)
        if partner is None:
            continue
        mine = result[node.layer_id]
        lone = isinstance(mine, FpgaWhole) and mine.fused_group_id == node.layer_id
        if lone and i + 1 < len(graph.nodes):
            nxt = result[graph.nodes[i + 1].layer_id]
            lone = not (isinstance(nxt, FpgaWhole) and nxt.fused_group_id == node.layer_id)
        if lone and isinstance(result[partner], GpuOnly):
            result[partner] = DwSplit(partner=node.layer_id)
            result[node.layer_id] = DwSplit(partner=partner)
    return result


def canonical_plan(graph: ModelGraph, plan: PartitionPlan) -> PartitionPlan:
    decisions = canonical_decisions(graph, plan.decisions)
    if decisions == dict(plan.decisions):
        return plan
    return plan.model_copy(update={"decisions": decisions})
