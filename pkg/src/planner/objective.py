from dataclasses import dataclass
from typing import Tuple

from errors import PlanError

KINDS = ("latency", "energy", "weighted")


@dataclass(frozen=True)
class Objective:
    """
    What the planner minimizes. `weighted:<alpha>` scores a plan as
    alpha * L / L0 + (1 - alpha) * E / E0 against the GPU-only baseline (L0, E0).
    """
    kind: str = "energy"
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlanError(f"objective must be one of {list(KINDS)}, got '{self.kind}'", field="objective")
        if self.kind == "weighted" and not 0.0 <= self.alpha <= 1.0:
            raise PlanError(f"weighted objective needs 0 <= alpha <= 1, got {self.alpha}", field="objective")

    @classmethod
    def parse(cls, text: str) -> "Objective":
        kind, sep, alpha = text.strip().partition(":")
        if kind == "weighted":
            if not sep:
                raise PlanError("expected 'weighted:<alpha>'", field="objective")
            try:
                value = float(alpha)
            except ValueError:
                raise PlanError(f"alpha must be a number, got '{alpha}'", field="objective") from None
            return cls("weighted", value)
        if sep:
            raise PlanError(f"'{kind}' takes no parameter", field="objective")
        return cls(kind)

    def __str__(self) -> str:
        return f"weighted:{self.alpha!r}" if self.kind == "weighted" else self.kind

    def coefficients(self, baseline_latency_s: float, baseline_energy_j: float) -> Tuple[float, float]:
        """(a, b) such that the objective is a * latency + b * energy."""
        if self.kind == "latency":
            return 1.0, 0.0
        if self.kind == "energy":
            return 0.0, 1.0
        a = self.alpha / baseline_latency_s if baseline_latency_s > 0 else 0.0
        b = (1.0 - self.alpha) / baseline_energy_j if baseline_energy_j > 0 else 0.0
        return a, b
