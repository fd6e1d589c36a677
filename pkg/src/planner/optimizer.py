"""
Plan search.

Nodes are decided in topological order. Each partial assignment carries the FPGA
resources already committed and a `StageEvaluator` holding the stages closed so far,
so the objective of the prefix is known exactly. The bound adds, for every undecided
node, the cheapest contribution any of its candidates could make. Graphs with at most
`exact_limit` decision points are searched exhaustively with that bound; larger ones
use a beam over prefix objective.
"""

import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from cost_models import Cost, FpgaModel, FpgaResources, fpga_cost, link_cost
from device_manager import DeviceModels
from errors import PlanError
from graph_ops import mac_count
from log.log_util import load_json, save_json
from model import LayerKind, ModelGraph
from simulator import StageEvaluator, all_gpu_decisions, evaluate_decisions
from util.verbosity import LOG_VERBOSITY, SEARCH
from .candidates import enumerate_candidates
from .decisions import ChannelSplit, DwSplit, FpgaWhole, GpuOnly, PartitionDecision, PartitionPlan, decision_key
from .objective import Objective
from .validation import canonical_decisions, decision_resources, fpga_mapped_count, plan_resources

RELATIVE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SearchOptions:
    beam_width: int = 32
    exact_limit: int = 16
    extra_g: Tuple[int, ...] = ()
    exact_transfers: bool = False


@dataclass
class SearchStats:
    method: str = ""
    decision_points: int = 0
    expanded: int = 0
    pruned: int = 0
    leaves: int = 0


@dataclass(frozen=True)
class _State:
    decisions: Tuple[PartitionDecision, ...]
    usage: FpgaResources
    evaluator: StageEvaluator


def decision_options(graph: ModelGraph, fpga_model: FpgaModel, candidates: List[PartitionDecision], i: int,
                     decisions: Sequence[PartitionDecision],
                     usage: FpgaResources) -> Iterator[Tuple[PartitionDecision, FpgaResources]]:
    """Decisions for node `i` consistent with the prefix, each with the resulting resource total."""
    node = graph.nodes[i]
    prev = decisions[-1] if decisions else None

    if isinstance(prev, DwSplit) and prev.partner == node.layer_id:
        forced = DwSplit(partner=graph.nodes[i - 1].layer_id)
        total = usage + decision_resources(graph, node.layer_id, forced)
        if total.fits(fpga_model):
            yield forced, total
        return

    for decision in candidates:
        if isinstance(decision, FpgaWhole) and decision.fused_group_id != node.layer_id:
            if not isinstance(prev, FpgaWhole):
                continue
            decision = FpgaWhole(fused_group_id=prev.fused_group_id)
        elif isinstance(decision, DwSplit):
            if node.spec.kind != LayerKind.DEPTHWISE:
                continue
            pointwise = decision_resources(graph, decision.partner, DwSplit(partner=node.layer_id))
            if not (usage + pointwise).fits(fpga_model):
                continue
        total = usage + decision_resources(graph, node.layer_id, decision)
        if total.fits(fpga_model):
            yield decision, total


def enumerate_plans(graph: ModelGraph, fpga_model: FpgaModel, extra_g: Optional[Sequence[int]] = None,
                    objective: str = "energy") -> Iterator[PartitionPlan]:
    """Every structurally valid, feasible combination of candidate decisions."""
    candidates = [enumerate_candidates(node, graph, fpga_model, extra_g) for node in graph.nodes]
    stack = [((), FpgaResources())]
    while stack:
        decisions, usage = stack.pop()
        i = len(decisions)
        if i == len(graph.nodes):
            yield _plan(graph, dict(zip(graph.layer_ids, decisions)), objective)
            continue
        children = list(decision_options(graph, fpga_model, candidates[i], i, decisions, usage))
        for decision, total in reversed(children):
            stack.append((decisions + (decision,), total))


def all_gpu_plan(graph: ModelGraph, objective: str = "energy") -> PartitionPlan:
    return PartitionPlan(objective=objective, decisions=all_gpu_decisions(graph))


def _plan(graph: ModelGraph, decisions: Dict[str, PartitionDecision], objective: str) -> PartitionPlan:
    return PartitionPlan(objective=objective, decisions=decisions, resource_usage=plan_resources(graph, decisions))


class Planner:
    def __init__(self, graph: ModelGraph, models: DeviceModels, objective: Objective,
                 options: Optional[SearchOptions] = None):
        self.graph = graph
        self.models = models
        self.objective = objective
        self.options = options or SearchOptions()
        self.stats = SearchStats()
        self.candidates = [enumerate_candidates(node, graph, models.fpga, self.options.extra_g)
                           for node in graph.nodes]

        baseline = evaluate_decisions(graph, all_gpu_decisions(graph), models)
        self.coefficients = objective.coefficients(baseline.closed_latency_s, baseline.closed_energy_j)
        self.suffix_bounds = self._suffix_bounds()

    def value(self, latency_s: float, energy_j: float) -> float:
        a, b = self.coefficients
        return a * latency_s + b * energy_j

    def _contribution_floor(self, i: int) -> float:
        """Least objective any candidate of node `i` can add on top of an exact prefix."""
        graph, models = self.graph, self.models
        node = graph.nodes[i]
        layer_id = node.layer_id
        probe = StageEvaluator(graph, models, self.options.exact_transfers)
        floors = []
        for decision in self.candidates[i]:
            if isinstance(decision, GpuOnly):
                cost = probe.gpu_layer_cost(layer_id)
            elif isinstance(decision, FpgaWhole):
                # a segment member adds its pipeline depth and its MAC energy
                fpga = models.fpga
                latency = fpga.pipeline_depth_per_layer / fpga.clock_hz
                macs = mac_count(node.spec, graph.in_shape(layer_id))
                energy = fpga.static_power_w * latency + fpga.energy_per_mac_j * macs
                cost = Cost(latency, energy)
            elif isinstance(decision, ChannelSplit):
                stage = probe.split_stage(layer_id, decision.g)
                cost = Cost(stage.stage_latency_s, stage.energy_j)
            elif node.spec.kind == LayerKind.DEPTHWISE:
                cost = probe.gpu_layer_cost(layer_id) + link_cost(graph.shape_of(layer_id).byte_size, models.link)
            else:
                cost = (fpga_cost(node.spec, graph.in_shape(layer_id), models.fpga)
                        + link_cost(graph.shape_of(layer_id).byte_size, models.link))
            floors.append(self.value(cost.latency_s, cost.energy_j))
        return min(floors)

    def _suffix_bounds(self) -> List[float]:
        n = len(self.graph.nodes)
        bounds = [0.0] * (n + 1)
        for i in range(n - 1, -1, -1):
            bounds[i] = bounds[i + 1] + self._contribution_floor(i)
        return bounds

    def _prefix_value(self, state: _State) -> float:
        return self.value(*state.evaluator.prefix_totals())

    def _children(self, state: _State) -> Iterator[_State]:
        i = len(state.decisions)
        layer_id = self.graph.nodes[i].layer_id
        for decision, total in decision_options(self.graph, self.models.fpga, self.candidates[i], i,
                                                state.decisions, state.usage):
            self.stats.expanded += 1
            yield _State(state.decisions + (decision,), total, state.evaluator.push(layer_id, decision))

    def _leaf_key(self, state: _State) -> Tuple[Tuple, Dict[str, PartitionDecision]]:
        self.stats.leaves += 1
        decisions = dict(zip(self.graph.layer_ids, state.decisions))
        canonical = canonical_decisions(self.graph, decisions)
        if canonical != decisions:
            evaluator = evaluate_decisions(self.graph, canonical, self.models, self.options.exact_transfers)
        else:
            evaluator = state.evaluator.finish()
        latency, energy = evaluator.closed_latency_s, evaluator.closed_energy_j
        vector = tuple(decision_key(canonical[layer_id]) for layer_id in self.graph.layer_ids)
        key = (self.value(latency, energy), energy, latency, fpga_mapped_count(self.graph, canonical), vector)
        return key, canonical

    def _root(self) -> _State:
        return _State((), FpgaResources(), StageEvaluator(self.graph, self.models, self.options.exact_transfers))

    def branch_and_bound(self) -> Dict[str, PartitionDecision]:
        self.stats.method = "branch-and-bound"
        n = len(self.graph.nodes)
        best_key, best = None, None
        stack = [self._root()]
        while stack:
            state = stack.pop()
            depth = len(state.decisions)
            if best_key is not None:
                bound = self._prefix_value(state) + self.suffix_bounds[depth]
                if bound > best_key[0] + RELATIVE_TOLERANCE * abs(best_key[0]):
                    self.stats.pruned += 1
                    continue
            if depth == n:
                key, decisions = self._leaf_key(state)
                if best_key is None or key < best_key:
                    best_key, best = key, decisions
                continue
            stack.extend(reversed(list(self._children(state))))
        return best

    def beam(self) -> Dict[str, PartitionDecision]:
        self.stats.method = f"beam(width={self.options.beam_width})"
        states = [self._root()]
        for _ in self.graph.nodes:
            expanded = [child for state in states for child in self._children(state)]
            expanded.sort(key=lambda s: (self._prefix_value(s), tuple(decision_key(d) for d in s.decisions)))
            self.stats.pruned += max(0, len(expanded) - self.options.beam_width)
            states = expanded[:self.options.beam_width]
        # the all-GPU plan may have fallen off the beam
        states.append(self._all_gpu_state())
        return min((self._leaf_key(state) for state in states), key=lambda kd: kd[0])[1]

    def _all_gpu_state(self) -> _State:
        state = self._root()
        for node in self.graph.nodes:
            state = _State(state.decisions + (GpuOnly(),), state.usage, state.evaluator.push(node.layer_id, GpuOnly()))
        return state

    def search(self) -> PartitionPlan:
        graph = self.graph
        self.stats.decision_points = sum(1 for c in self.candidates if len(c) > 1)
        if self.stats.decision_points <= self.options.exact_limit:
            decisions = self.branch_and_bound()
        else:
            decisions = self.beam()
        if LOG_VERBOSITY >= SEARCH:
            s = self.stats
            print(f"[planner] {graph.name}: {s.method}, {s.decision_points} decision points, "
                  f"{s.expanded} expanded, {s.pruned} pruned, {s.leaves} leaves", file=sys.stderr)
        return _plan(graph, decisions, str(self.objective))


def optimize(graph: ModelGraph, models: DeviceModels, objective: Objective = Objective(),
             options: Optional[SearchOptions] = None) -> PartitionPlan:
    """Feasible plan minimizing `objective`. The all-GPU plan is always a candidate, so a result always exists."""
    if not graph.nodes:
        return PartitionPlan(objective=str(objective), decisions={})
    return Planner(graph, models, objective, options).search()


def load_plan(path) -> PartitionPlan:
    source = str(Path(path))
    if not os.path.exists(source):
        raise PlanError("file not found", source=source)
    try:
        data = load_json(source)
    except json.JSONDecodeError as e:
        raise PlanError(f"invalid JSON: {e.msg}", source=source, field=f"line {e.lineno}") from None
    except UnicodeDecodeError as e:
        raise PlanError(f"not UTF-8 text (byte {e.start})", source=source) from None
    try:
        return PartitionPlan.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise PlanError(first["msg"], source=source, field=location) from None


def save_plan(path, plan: PartitionPlan):
    save_json(path, plan.model_dump(mode="json"))
