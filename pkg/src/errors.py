from typing import Optional


class PartitionToolError(ValueError):
    """Base error. `source` names the offending file, `field` the key, column, line or node."""

    def __init__(self, message: str, source: Optional[str] = None, field: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.source = source
        self.field = field

    def with_source(self, source: str) -> "PartitionToolError":
        if self.source is None:
            self.source = source
        return self

    def diagnostic(self) -> str:
        parts = [p for p in (self.source, self.field) if p]
        parts.append(self.message)
        return ": ".join(parts)


class ModelSyntaxError(PartitionToolError):
    pass


class ModelSemanticError(PartitionToolError):
    pass


class ShapeError(ModelSemanticError):
    pass


class FxpError(PartitionToolError):
    pass


class CalibrationError(PartitionToolError):
    pass


class DeviceConfigError(PartitionToolError):
    pass


class InfeasibleError(PartitionToolError):
    pass


class PlanError(PartitionToolError):
    pass


class SimulationError(PartitionToolError):
    pass


class ReportError(PartitionToolError):
    pass
