"""
Per-layer mapping decisions and the plan document.

Plans serialize as JSON; each decision carries a `kind` tag:

    {"schema_version": "1.0", "objective": "energy",
     "decisions": {"squeeze": {"kind": "FpgaWhole", "fused_group_id": "squeeze"},
                   "expand3x3": {"kind": "ChannelSplit", "g": 4},
                   "dw": {"kind": "DwSplit", "partner": "project"}, ...},
     "resource_usage": {"macs": 3840, "weight_bytes": 3840, "buffer_bytes": 448}}
"""

from enum import Enum
from typing import Annotated, Dict, Literal, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field


class PlanVersion(Enum):
    """Versioning for plan format changes"""
    V1_0 = "1.0"
    CURRENT = V1_0


class GpuOnly(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    kind: Literal["GpuOnly"] = "GpuOnly"


class FpgaWhole(BaseModel):
    """Whole layer on the FPGA. Nodes sharing `fused_group_id` (the chain head) form one fused segment."""
    model_config = ConfigDict(frozen=True, extra="forbid")
    kind: Literal["FpgaWhole"] = "FpgaWhole"
    fused_group_id: str


class ChannelSplit(BaseModel):
    """The last `g` input channels of a Conv go to the FPGA, the rest stay on the GPU."""
    model_config = ConfigDict(frozen=True, extra="forbid")
    kind: Literal["ChannelSplit"] = "ChannelSplit"
    g: int = Field(gt=0)


class DwSplit(BaseModel):
    """Depthwise stage on the GPU, pointwise stage on the FPGA; recorded on both nodes."""
    model_config = ConfigDict(frozen=True, extra="forbid")
    kind: Literal["DwSplit"] = "DwSplit"
    partner: str


PartitionDecision = Annotated[Union[GpuOnly, FpgaWhole, ChannelSplit, DwSplit], Field(discriminator="kind")]

_RANK = {"GpuOnly": 0, "FpgaWhole": 1, "ChannelSplit": 2, "DwSplit": 3}


def decision_key(decision: PartitionDecision) -> Tuple:
    """Total order used for tie-breaking: GpuOnly < FpgaWhole < ChannelSplit < DwSplit, then parameters."""
    if isinstance(decision, FpgaWhole):
        return _RANK[decision.kind], decision.fused_group_id
    if isinstance(decision, ChannelSplit):
        return _RANK[decision.kind], decision.g
    if isinstance(decision, DwSplit):
        return _RANK[decision.kind], decision.partner
    return (_RANK[decision.kind],)


class ResourceUsage(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    macs: int = 0
    weight_bytes: int = 0
    buffer_bytes: int = 0

    @property
    def memory_bytes(self) -> int:
        return self.weight_bytes + self.buffer_bytes

    def __add__(self, other: "ResourceUsage") -> "ResourceUsage":
        return ResourceUsage(macs=self.macs + other.macs,
                             weight_bytes=self.weight_bytes + other.weight_bytes,
                             buffer_bytes=self.buffer_bytes + other.buffer_bytes)


class PartitionPlan(BaseModel):
    """Decisions keyed by layer id, in topological order."""
    model_config = ConfigDict(frozen=True, extra="forbid")
    schema_version: str = PlanVersion.CURRENT.value
    objective: str = "energy"
    decisions: Dict[str, PartitionDecision]
    resource_usage: ResourceUsage = ResourceUsage()
