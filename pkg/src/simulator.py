"""
Stage-level latency and energy simulation of a partition plan.

Data model: the graph input and every stage output live in GPU (host) memory. A stage
that computes on the FPGA fetches its input over the link and sends its output back.

    gpu                 one GpuOnly layer
    fpga                one FpgaWhole layer: inbound + pipeline + outbound
    fused_segment       a chain of FpgaWhole layers: one inbound transfer, a pipeline
                        of (input pixels + summed depths) / clock, one outbound transfer
    parallel_split      ChannelSplit: max(gpu, fpga + comm) where comm moves the g-channel
                        input slice over and the partial result back
    sequential_offload  DwSplit: gpu depthwise + comm (intermediate) + fpga pointwise,
                        then the pointwise output crosses back

Energy always sums every device and link term.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from cost_models import Cost, fpga_cost, fpga_energy, fpga_latency, gpu_cost, link_cost
from device_manager import DeviceModels
from errors import InfeasibleError, SimulationError
from graph_ops import mac_count
from model import LayerKind, ModelGraph
from planner.decisions import ChannelSplit, DwSplit, FpgaWhole, GpuOnly, PartitionDecision, PartitionPlan
from planner.validation import validate_plan


class ReportVersion(Enum):
    """Versioning for report format changes"""
    V1_0 = "1.0"
    CURRENT = V1_0


class StageMode(str, Enum):
    GPU = "gpu"
    FPGA = "fpga"
    PARALLEL_SPLIT = "parallel_split"
    SEQUENTIAL_OFFLOAD = "sequential_offload"
    FUSED_SEGMENT = "fused_segment"


def stage_latency(mode: StageMode, gpu_s: float, fpga_s: float, comm_s: float) -> float:
    if mode == StageMode.PARALLEL_SPLIT:
        return max(gpu_s, fpga_s + comm_s)
    if mode == StageMode.SEQUENTIAL_OFFLOAD:
        return gpu_s + comm_s + fpga_s
    if mode == StageMode.GPU:
        return gpu_s
    return fpga_s


class StageCost(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    stage_id: str
    mode: StageMode
    layers: List[str]
    gpu_latency_s: float = 0.0
    fpga_latency_s: float = 0.0
    comm_latency_s: float = 0.0
    crossing_latency_s: float = 0.0
    stage_latency_s: float = 0.0
    energy_j: float = 0.0
    bytes_transferred: int = 0


def _stage(stage_id: str, mode: StageMode, layers, gpu: Cost = Cost(0.0, 0.0), fpga: Cost = Cost(0.0, 0.0),
           comm: Cost = Cost(0.0, 0.0), crossing: Cost = Cost(0.0, 0.0), bytes_transferred: int = 0) -> StageCost:
    latency = stage_latency(mode, gpu.latency_s, fpga.latency_s, comm.latency_s) + crossing.latency_s
    return StageCost(
        stage_id=stage_id, mode=mode, layers=list(layers),
        gpu_latency_s=gpu.latency_s, fpga_latency_s=fpga.latency_s, comm_latency_s=comm.latency_s,
        crossing_latency_s=crossing.latency_s, stage_latency_s=latency,
        energy_j=gpu.energy_j + fpga.energy_j + comm.energy_j + crossing.energy_j,
        bytes_transferred=bytes_transferred,
    )


@dataclass(frozen=True)
class _OpenSegment:
    members: Tuple[str, ...]
    input_pixels: int
    input_bytes: int
    output_bytes: int
    macs: int


@dataclass(frozen=True)
class _PendingDw:
    dw_id: str
    pw_id: str
    gpu: Cost
    comm: Cost
    intermediate_bytes: int


@dataclass(frozen=True)
class StageEvaluator:
    """
    Builds stages from decisions pushed in topological order. Immutable: `push` returns a
    new evaluator, so search branches can share prefixes.
    """
    graph: ModelGraph
    models: DeviceModels
    exact_transfers: bool = False
    stages: Tuple[StageCost, ...] = ()
    closed_latency_s: float = 0.0
    closed_energy_j: float = 0.0
    segment: Optional[_OpenSegment] = None
    segment_id: Optional[str] = None
    pending_dw: Optional[_PendingDw] = None
    _costs: Dict = field(default_factory=dict, compare=False, repr=False)

    def gpu_layer_cost(self, layer_id: str) -> Cost:
        key = ("gpu", layer_id)
        if key not in self._costs:
            self._costs[key] = gpu_cost(self.graph.node(layer_id).spec, self.graph.in_shape(layer_id),
                                        self.models.gpu, out_shape=self.graph.shape_of(layer_id))
        return self._costs[key]

    def _append(self, stage: StageCost, **changes) -> "StageEvaluator":
        return replace(self, stages=self.stages + (stage,),
                       closed_latency_s=self.closed_latency_s + stage.stage_latency_s,
                       closed_energy_j=self.closed_energy_j + stage.energy_j, **changes)

    def _segment_parts(self, seg: _OpenSegment) -> Tuple[Cost, Cost, Cost]:
        fpga = self.models.fpga
        latency = fpga_latency(seg.input_pixels, len(seg.members), fpga)
        return (Cost(latency, fpga_energy(latency, seg.macs, fpga)),
                link_cost(seg.input_bytes, self.models.link),
                link_cost(seg.output_bytes, self.models.link))

    def _close_segment(self) -> "StageEvaluator":
        seg = self.segment
        if seg is None:
            return self
        compute, inbound, outbound = self._segment_parts(seg)
        mode = StageMode.FPGA if len(seg.members) == 1 else StageMode.FUSED_SEGMENT
        stage = _stage("+".join(seg.members), mode, seg.members, fpga=compute, crossing=inbound + outbound,
                       bytes_transferred=seg.input_bytes + seg.output_bytes)
        return self._append(stage, segment=None, segment_id=None)

    def push(self, layer_id: str, decision: PartitionDecision) -> "StageEvaluator":
        graph = self.graph
        node = graph.node(layer_id)
        out_bytes = graph.shape_of(layer_id).byte_size

        if isinstance(decision, FpgaWhole) and self.segment is not None and decision.fused_group_id == self.segment_id:
            seg = self.segment
            macs = seg.macs + self._macs(layer_id)
            return replace(self, segment=replace(seg, members=seg.members + (layer_id,), output_bytes=out_bytes,
                                                 macs=macs))

        ev = self._close_segment()
        if ev.pending_dw is not None and not (isinstance(decision, DwSplit) and layer_id == ev.pending_dw.pw_id):
            raise SimulationError(f"DwSplit on '{ev.pending_dw.dw_id}' is not followed by its pointwise partner",
                                  field=layer_id)

        if isinstance(decision, GpuOnly):
            return ev._append(_stage(layer_id, StageMode.GPU, [layer_id], gpu=ev.gpu_layer_cost(layer_id)))

        if isinstance(decision, FpgaWhole):
            if decision.fused_group_id != layer_id:
                raise SimulationError(f"fused group '{decision.fused_group_id}' is not contiguous", field=layer_id)
            in_shape = graph.in_shape(layer_id)
            seg = _OpenSegment(members=(layer_id,), input_pixels=in_shape.pixels, input_bytes=in_shape.byte_size,
                               output_bytes=out_bytes, macs=self._macs(layer_id))
            return replace(ev, segment=seg, segment_id=layer_id)

        if isinstance(decision, ChannelSplit):
            return ev._append(ev.split_stage(layer_id, decision.g))

        if node.spec.kind == LayerKind.DEPTHWISE:
            comm = link_cost(out_bytes, ev.models.link)
            pending = _PendingDw(layer_id, decision.partner, ev.gpu_layer_cost(layer_id), comm, out_bytes)
            return replace(ev, pending_dw=pending)

        pending = ev.pending_dw
        fpga = fpga_cost(node.spec, graph.in_shape(layer_id), ev.models.fpga)
        crossing = link_cost(out_bytes, ev.models.link)
        stage = _stage(f"{pending.dw_id}+{layer_id}", StageMode.SEQUENTIAL_OFFLOAD, [pending.dw_id, layer_id],
                       gpu=pending.gpu, fpga=fpga, comm=pending.comm, crossing=crossing,
                       bytes_transferred=pending.intermediate_bytes + out_bytes)
        return ev._append(stage, pending_dw=None)

    def _macs(self, layer_id: str) -> int:
        return mac_count(self.graph.node(layer_id).spec, self.graph.in_shape(layer_id))

    def split_stage(self, layer_id: str, g: int) -> StageCost:
        spec = self.graph.node(layer_id).spec
        in_shape = self.graph.in_shape(layer_id)
        out_shape = self.graph.shape_of(layer_id)
        gpu = gpu_cost(spec, in_shape.with_channels(in_shape.c - g), self.models.gpu, out_shape=out_shape)
        fpga = fpga_cost(spec, in_shape.with_channels(g), self.models.fpga)
        slice_bytes = in_shape.pixels * g
        partial_bytes = out_shape.byte_size * (4 if self.exact_transfers else 1)
        comm = link_cost(slice_bytes, self.models.link) + link_cost(partial_bytes, self.models.link)
        return _stage(layer_id, StageMode.PARALLEL_SPLIT, [layer_id], gpu=gpu, fpga=fpga, comm=comm,
                      bytes_transferred=slice_bytes + partial_bytes)

    def prefix_totals(self) -> Tuple[float, float]:
        """(latency, energy) already committed; open work counts without its not-yet-known outbound transfer."""
        latency, energy = self.closed_latency_s, self.closed_energy_j
        if self.segment is not None:
            compute, inbound, _ = self._segment_parts(self.segment)
            latency += compute.latency_s + inbound.latency_s
            energy += compute.energy_j + inbound.energy_j
        if self.pending_dw is not None:
            latency += self.pending_dw.gpu.latency_s + self.pending_dw.comm.latency_s
            energy += self.pending_dw.gpu.energy_j + self.pending_dw.comm.energy_j
        return latency, energy

    def finish(self) -> "StageEvaluator":
        ev = self._close_segment()
        if ev.pending_dw is not None:
            raise SimulationError("DwSplit is missing its pointwise partner", field=ev.pending_dw.dw_id)
        return ev


class BaselineTotals(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    total_latency_s: float
    total_energy_j: float


class CostReport(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    schema_version: str = ReportVersion.CURRENT.value
    workload: str
    objective: str
    stages: List[StageCost]
    total_latency_s: float
    total_energy_j: float
    bytes_transferred: int
    baseline: Optional[BaselineTotals] = None
    energy_gain: Optional[float] = None
    speedup: Optional[float] = None
    energy_reduction: Optional[float] = None
    latency_reduction: Optional[float] = None


@dataclass(frozen=True)
class Gains:
    energy_gain: float
    speedup: float
    energy_reduction: float
    latency_reduction: float


def evaluate_decisions(graph: ModelGraph, decisions: Dict[str, PartitionDecision], models: DeviceModels,
                       exact_transfers: bool = False) -> StageEvaluator:
    ev = StageEvaluator(graph, models, exact_transfers)
    for node in graph.nodes:
        ev = ev.push(node.layer_id, decisions[node.layer_id])
    return ev.finish()


def simulate(graph: ModelGraph, plan: PartitionPlan, models: DeviceModels,
             exact_transfers: bool = False) -> CostReport:
    verdict = validate_plan(graph, plan, models.fpga)
    if not verdict.feasible:
        raise InfeasibleError("; ".join(verdict.violations), field="plan")
    ev = evaluate_decisions(graph, plan.decisions, models, exact_transfers)
    return CostReport(
        workload=graph.name,
        objective=plan.objective,
        stages=list(ev.stages),
        total_latency_s=ev.closed_latency_s,
        total_energy_j=ev.closed_energy_j,
        bytes_transferred=sum(stage.bytes_transferred for stage in ev.stages),
    )


def all_gpu_decisions(graph: ModelGraph) -> Dict[str, PartitionDecision]:
    return {layer_id: GpuOnly() for layer_id in graph.layer_ids}


def baseline_gpu_only(graph: ModelGraph, models: DeviceModels, objective: str = "energy") -> CostReport:
    plan = PartitionPlan(objective=objective, decisions=all_gpu_decisions(graph))
    return simulate(graph, plan, models)


def compare(report: CostReport, baseline: CostReport) -> Gains:
    for name, value in (("report energy", report.total_energy_j), ("report latency", report.total_latency_s),
                        ("baseline energy", baseline.total_energy_j),
                        ("baseline latency", baseline.total_latency_s)):
        if value <= 0:
            raise SimulationError(f"{name} is zero; gains are undefined", field=name.replace(" ", "_"))
    return Gains(
        energy_gain=baseline.total_energy_j / report.total_energy_j,
        speedup=baseline.total_latency_s / report.total_latency_s,
        energy_reduction=1.0 - report.total_energy_j / baseline.total_energy_j,
        latency_reduction=1.0 - report.total_latency_s / baseline.total_latency_s,
    )


def with_baseline(report: CostReport, baseline: CostReport) -> CostReport:
    gains = compare(report, baseline)
    return report.model_copy(update={
        "baseline": BaselineTotals(total_latency_s=baseline.total_latency_s,
                                   total_energy_j=baseline.total_energy_j),
        "energy_gain": gains.energy_gain,
        "speedup": gains.speedup,
        "energy_reduction": gains.energy_reduction,
        "latency_reduction": gains.latency_reduction,
    })
