"""Command handlers behind the CLI subcommands"""

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from device_manager import DeviceModels, load_device_models
from errors import PlanError, ReportError
from fxp import execute_graph_trace, execute_plan_trace, first_mismatch, random_tensor, random_weight_store
from log.run_tracker import track_run
from model import ModelGraph
from model_format import load_model
from planner.decisions import PartitionPlan
from planner.objective import Objective
from planner.optimizer import SearchOptions, all_gpu_plan, load_plan, optimize, save_plan
from planner.validation import check_plan_structure
from report_io import (format_gain, format_gain_table, gain_rows, load_report, save_report, write_gain_table,
                       write_stage_table)
from simulator import CostReport, simulate, with_baseline
from templates.templates_manager import parse_builtin_reference
from util.log import format_graph_context, format_plan_context, format_stage_context
from util.verbosity import DETAIL, LOG_VERBOSITY, SEARCH, SUMMARY

BUILTIN_PREFIX = "builtin:"


@dataclass(frozen=True)
class RunConfig:
    model: str = ""
    device_config: Optional[str] = None
    calibration: Optional[str] = None
    objective: Objective = Objective()
    plan: Optional[str] = None
    out: Optional[str] = None
    seed: int = 0
    count: int = 32
    beam_width: int = 32
    g_grid: Tuple[int, ...] = ()
    exact_transfers: bool = False
    reports: List[str] = field(default_factory=list)


def _info(message: str, level: int = SUMMARY):
    if LOG_VERBOSITY >= level:
        print(message, file=sys.stderr)


def load_graph(reference: str) -> ModelGraph:
    if reference.startswith(BUILTIN_PREFIX):
        return parse_builtin_reference(reference)
    return load_model(reference)


def _inputs(config: RunConfig) -> Tuple[ModelGraph, DeviceModels]:
    graph = load_graph(config.model)
    models = load_device_models(config.device_config, config.calibration)
    _info(f"[model] {format_graph_context(graph, LOG_VERBOSITY)}", DETAIL)
    return graph, models


def _given_plan(config: RunConfig, graph: ModelGraph) -> PartitionPlan:
    plan = load_plan(config.plan)
    try:
        check_plan_structure(graph, plan)
    except PlanError as e:
        raise e.with_source(config.plan)
    return plan


def _search_options(config: RunConfig) -> SearchOptions:
    return SearchOptions(beam_width=config.beam_width, extra_g=config.g_grid, exact_transfers=config.exact_transfers)


def _simulate_pair(graph: ModelGraph, plan: PartitionPlan, models: DeviceModels,
                   config: RunConfig) -> Tuple[CostReport, CostReport]:
    report = simulate(graph, plan, models, exact_transfers=config.exact_transfers)
    baseline = simulate(graph, all_gpu_plan(graph, plan.objective), models, exact_transfers=config.exact_transfers)
    for stage in report.stages:
        _info(f"[stage] {format_stage_context(stage, LOG_VERBOSITY)}", DETAIL)
    return with_baseline(report, baseline), with_baseline(baseline, baseline)


def _write_outputs(config: RunConfig, report: CostReport, baseline: CostReport, plan: Optional[PartitionPlan] = None):
    if not config.out:
        return
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    if plan is not None:
        save_plan(out / "plan.json", plan)
    save_report(out / "report.json", report)
    save_report(out / "baseline.json", baseline)
    write_stage_table(out / "stages.csv", report)
    _info(f"[out] wrote {out}", DETAIL)


def _gain_line(report: CostReport) -> str:
    return (f"{report.workload}: energy {report.total_energy_j * 1e6:.3f} uJ, "
            f"latency {report.total_latency_s * 1e6:.3f} us, "
            f"energy gain {format_gain(report.energy_gain)}, speedup {format_gain(report.speedup)}")


def _track(command: str, config: RunConfig, report: CostReport):
    track_run(command,
              params={"model": config.model, "objective": str(config.objective),
                      "calibration": config.calibration or "default",
                      "device_config": config.device_config or "default"},
              metrics={"total_latency_s": report.total_latency_s, "total_energy_j": report.total_energy_j,
                       "energy_gain": report.energy_gain, "speedup": report.speedup})


def handle_plan(config: RunConfig) -> int:
    """Optimize (or reuse --plan), simulate against the GPU-only baseline, write outputs"""
    graph, models = _inputs(config)
    if config.plan:
        plan = _given_plan(config, graph)
    else:
        plan = optimize(graph, models, config.objective, _search_options(config))
    _info(f"[plan] {format_plan_context(plan, LOG_VERBOSITY)}")
    report, baseline = _simulate_pair(graph, plan, models, config)
    _write_outputs(config, report, baseline, plan)
    print(_gain_line(report))
    _track("plan", config, report)
    return 0


def handle_simulate(config: RunConfig) -> int:
    """Simulate --plan, or the all-GPU plan when none is given"""
    graph, models = _inputs(config)
    plan = _given_plan(config, graph) if config.plan else all_gpu_plan(graph, str(config.objective))
    report, baseline = _simulate_pair(graph, plan, models, config)
    _write_outputs(config, report, baseline)
    print(_gain_line(report))
    _track("simulate", config, report)
    return 0


def handle_verify(config: RunConfig) -> int:
    """Bit-exact comparison of the partitioned execution against the single-device reference"""
    graph, models = _inputs(config)
    if config.plan:
        plan = _given_plan(config, graph)
    else:
        plan = optimize(graph, models, config.objective, _search_options(config))
    _info(f"[plan] {format_plan_context(plan, LOG_VERBOSITY)}")

    rng = np.random.default_rng(config.seed)
    for case in range(config.count):
        x = random_tensor(graph.input_shape, rng)
        store = random_weight_store(graph, rng)
        expected = execute_graph_trace(graph, x, store)
        actual = execute_plan_trace(graph, plan, x, store)
        mismatch = first_mismatch(expected, actual, ["input"] + graph.layer_ids)
        if mismatch is not None:
            layer_id, index, want, got = mismatch
            print(f"verify {graph.name}: FAIL at case {case}: layer '{layer_id}' element {index}: "
                  f"expected {want}, got {got}", file=sys.stderr)
            return 1
        _info(f"[verify] case {case} ok", SEARCH)
    print(f"verify {graph.name}: PASS ({config.count} cases, seed {config.seed})")
    return 0


def handle_report(config: RunConfig) -> int:
    """Gain table over report documents that embed their baseline"""
    rows = []
    for path in config.reports:
        try:
            rows.extend(gain_rows([load_report(path)]))
        except ReportError as e:
            raise e.with_source(path)
    table = format_gain_table(rows)
    sys.stdout.write(table)
    if config.out:
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        write_gain_table(out / "gains.csv", rows)
        (out / "gains.txt").write_text(table, encoding="utf-8")
    return 0


HANDLERS = {
    "plan": handle_plan,
    "simulate": handle_simulate,
    "verify": handle_verify,
    "report": handle_report,
}


def run(command: str, config: RunConfig) -> int:
    return HANDLERS[command](config)


def parse_g_grid(text: Optional[str]) -> Sequence[int]:
    if not text:
        return ()
    try:
        return tuple(sorted({int(v) for v in text.split(",") if v.strip()}))
    except ValueError:
        raise PlanError(f"expected comma-separated integers, got '{text}'", field="--g-grid") from None
