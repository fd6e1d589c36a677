"""
Parameter sweeps over templates and single layers.

`ifm_sweep` replans a template at every input size of a ladder and records the gains;
`layer_sweep` compares the two devices on one Conv layer across kernel sizes and filter
counts, which is where the FPGA multiplier budget runs out.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

from cost_models import fpga_energy, fpga_latency, fpga_resources, gpu_cost
from device_manager import DeviceModels
from graph_ops import ceil_div, mac_count
from model import LayerSpec, TensorShape
from planner.objective import Objective
from planner.optimizer import SearchOptions, all_gpu_plan, optimize
from simulator import compare, simulate
from templates.templates_manager import builtin_module
from util.log import format_plan_context


def ifm_ladder(start: int = 224, stop: int = 4) -> List[int]:
    """Halve (rounding up) from `start` until `stop`: 224, 112, 56, 28, 14, 7, 4."""
    sizes = [start]
    while sizes[-1] > stop:
        sizes.append(max(stop, ceil_div(sizes[-1], 2)))
    return sizes


@dataclass(frozen=True)
class IfmRow:
    size: int
    plan: str
    total_latency_s: float
    total_energy_j: float
    energy_gain: float
    speedup: float


def ifm_sweep(template: str, models: DeviceModels, objective: Objective = Objective(),
              sizes: Optional[Sequence[int]] = None, params: Optional[Dict[str, int]] = None,
              options: Optional[SearchOptions] = None) -> List[IfmRow]:
    rows = []
    for size in sizes or ifm_ladder():
        graph = builtin_module(template, {**(params or {}), "h": size, "w": size})
        plan = optimize(graph, models, objective, options)
        report = simulate(graph, plan, models)
        baseline = simulate(graph, all_gpu_plan(graph, plan.objective), models)
        gains = compare(report, baseline)
        rows.append(IfmRow(size, format_plan_context(plan, 2), report.total_latency_s, report.total_energy_j,
                           gains.energy_gain, gains.speedup))
    return rows


@dataclass(frozen=True)
class LayerRow:
    k: int
    n: int
    macs: int
    multipliers: int
    fpga_feasible: bool
    fpga_latency_s: float
    fpga_energy_j: float
    gpu_latency_s: float
    gpu_energy_j: float


def layer_sweep(models: DeviceModels, h: int = 224, w: int = 224, c: int = 3,
                kernels: Iterable[int] = (1, 3, 5, 7),
                filters: Iterable[int] = (2, 4, 8, 16, 32, 64)) -> List[LayerRow]:
    """FPGA figures are what the layer would cost if it were mapped, feasible or not."""
    in_shape = TensorShape(h, w, c)
    rows = []
    for k in kernels:
        for n in filters:
            spec = LayerSpec.conv(k, n)
            resources = fpga_resources(spec, in_shape)
            macs = mac_count(spec, in_shape)
            latency = fpga_latency(in_shape.pixels, 1, models.fpga)
            gpu = gpu_cost(spec, in_shape, models.gpu)
            rows.append(LayerRow(k, n, macs, resources.macs, resources.fits(models.fpga), latency,
                                 fpga_energy(latency, macs, models.fpga), gpu.latency_s, gpu.energy_j))
    return rows
