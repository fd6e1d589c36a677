"""
Device cost models.

FPGA: direct hardware mapping. Every kernel tap of every filter is a physical multiplier,
weights and line buffers stay on chip, and the pipeline consumes one input pixel per
clock. GPU: calibration table interpolated in work units. Link: affine transfer model.
"""

from dataclasses import dataclass

from pydantic import BaseModel, ConfigDict, Field

from calibration import GpuCalibrationTable
from errors import InfeasibleError
from graph_ops import mac_count, node_output_shape, spatial_out, weight_bytes
from model import LayerKind, LayerSpec, PARAMETRIC_KINDS, POOL_KINDS, TensorShape


class FpgaModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    mac_budget: int = Field(4800, gt=0)
    memory_budget_bytes: int = Field(2 * 1024 * 1024, gt=0)
    clock_hz: float = Field(1e8, gt=0)
    energy_per_mac_j: float = Field(2e-12, gt=0)
    static_power_w: float = Field(1.5, gt=0)
    pipeline_depth_per_layer: int = Field(50, gt=0)


class LinkModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    bandwidth_bytes_per_s: float = Field(2.5e9, gt=0)
    fixed_latency_s: float = Field(5e-6, ge=0)
    energy_per_byte_j: float = Field(8e-11, gt=0)


@dataclass(frozen=True)
class Cost:
    latency_s: float
    energy_j: float

    def __add__(self, other: "Cost") -> "Cost":
        return Cost(self.latency_s + other.latency_s, self.energy_j + other.energy_j)


@dataclass(frozen=True)
class FpgaResources:
    macs: int = 0
    weight_bytes: int = 0
    buffer_bytes: int = 0

    @property
    def memory_bytes(self) -> int:
        return self.weight_bytes + self.buffer_bytes

    def __add__(self, other: "FpgaResources") -> "FpgaResources":
        return FpgaResources(self.macs + other.macs, self.weight_bytes + other.weight_bytes,
                             self.buffer_bytes + other.buffer_bytes)

    def fits(self, model: FpgaModel) -> bool:
        return self.macs <= model.mac_budget and self.memory_bytes <= model.memory_budget_bytes


def fpga_resources(spec: LayerSpec, in_shape: TensorShape) -> FpgaResources:
    """Multipliers, weight bytes and line-buffer bytes a layer occupies when mapped."""
    if spec.kind not in PARAMETRIC_KINDS:
        return FpgaResources()
    if spec.kind == LayerKind.DEPTHWISE:
        multipliers = spec.k_h * spec.k_w * in_shape.c
    else:
        multipliers = spec.k_h * spec.k_w * (in_shape.c // spec.groups) * spec.n
    return FpgaResources(
        macs=multipliers,
        weight_bytes=weight_bytes(spec, in_shape),
        buffer_bytes=(spec.k_h - 1) * in_shape.w * in_shape.c,
    )


def fpga_latency(input_pixels: int, layers: int, model: FpgaModel) -> float:
    """Fill-plus-stream latency of a pipeline of `layers` mapped layers."""
    return (input_pixels + layers * model.pipeline_depth_per_layer) / model.clock_hz


def fpga_energy(latency_s: float, macs: int, model: FpgaModel) -> float:
    return model.static_power_w * latency_s + model.energy_per_mac_j * macs


def fpga_cost(spec: LayerSpec, in_shape: TensorShape, model: FpgaModel) -> Cost:
    resources = fpga_resources(spec, in_shape)
    if not resources.fits(model):
        raise InfeasibleError(
            f"{spec.kind.value} needs {resources.macs} multipliers and {resources.memory_bytes} bytes; "
            f"budget is {model.mac_budget} multipliers and {model.memory_budget_bytes} bytes")
    latency = fpga_latency(in_shape.pixels, 1, model)
    return Cost(latency, fpga_energy(latency, mac_count(spec, in_shape), model))


def gpu_work(spec: LayerSpec, in_shape: TensorShape, out_shape: TensorShape) -> int:
    """Interpolation coordinate: MACs, window comparisons for pools, output elements otherwise."""
    if spec.kind in PARAMETRIC_KINDS:
        return mac_count(spec, in_shape)
    if spec.kind in POOL_KINDS:
        h_o, w_o = spatial_out(spec, in_shape)
        return h_o * w_o * in_shape.c * spec.k_h * spec.k_w
    return out_shape.byte_size


def gpu_cost(spec: LayerSpec, in_shape: TensorShape, table: GpuCalibrationTable,
             out_shape: TensorShape = None) -> Cost:
    if out_shape is None:
        out_shape = node_output_shape(spec, [in_shape])
    latency, power = table.lookup(spec.kind.value, gpu_work(spec, in_shape, out_shape))
    return Cost(latency, power * latency)


def link_cost(num_bytes: int, model: LinkModel) -> Cost:
    return Cost(model.fixed_latency_s + num_bytes / model.bandwidth_bytes_per_s,
                model.energy_per_byte_j * num_bytes)
