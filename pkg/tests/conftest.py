import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from calibration import load_calibration
from device_manager import load_device_models
from graph_ops import build_graph, output_extent
from model import LayerSpec, Node, TensorShape

settings.register_profile("repro", derandomize=True, deadline=None, max_examples=60)
settings.register_profile("dev", deadline=None, max_examples=200)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "repro"))

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
CALIBRATION = FIXTURES / "calibration"

CALIBRATION_HEADER = "op_kind,h,w,c_in,k,n,latency_us,power_mw\n"
ALL_KINDS = ("Conv", "DepthwiseConv", "Pointwise", "MaxPool", "AvgPool", "Concat", "Add", "ChannelSplit",
             "ChannelShuffle")


def flat_calibration(latency_us: float = 10.0, power_mw: float = 1000.0, overrides=None):
    """Two-row table per kind at a fixed latency and power; `overrides` maps kind -> (latency_us, power_mw)."""
    lines = [CALIBRATION_HEADER]
    for kind in ALL_KINDS:
        lat, pow_ = (overrides or {}).get(kind, (latency_us, power_mw))
        lines.append(f"{kind},1,1,1,1,1,{lat},{pow_}\n")
        lines.append(f"{kind},1000,1000,4,1,4,{lat},{pow_}\n")
    return load_calibration("".join(lines), source="<flat>")


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def favorable_models():
    return load_device_models(calibration=CALIBRATION / "fpga_favorable.csv")


@pytest.fixture(scope="session")
def gpu_dominant_models():
    return load_device_models(calibration=CALIBRATION / "gpu_dominant.csv")


@pytest.fixture(scope="session")
def crossover_models():
    return load_device_models(calibration=CALIBRATION / "crossover.csv")


class GraphBuilder:
    """Random chain of blocks covering every layer kind, on inputs of at most 8x8x8."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.h, self.w, self.c = (int(v) for v in rng.integers(2, 9, size=3))
        self.input_shape = TensorShape(self.h, self.w, self.c)
        self.nodes = []
        self.current = "input"

    def _id(self, prefix: str) -> str:
        return f"{prefix}{len(self.nodes)}"

    def _add(self, prefix: str, spec: LayerSpec, inputs=None) -> str:
        layer_id = self._id(prefix)
        self.nodes.append(Node(layer_id, spec, tuple(inputs or (self.current,))))
        return layer_id

    def _window(self, k: int):
        stride = int(self.rng.integers(1, 3)) if min(self.h, self.w) >= 4 else 1
        padding = "valid" if k <= min(self.h, self.w) and self.rng.random() < 0.25 else "same"
        self.h = output_extent(self.h, k, stride, padding)
        self.w = output_extent(self.w, k, stride, padding)
        return stride, padding

    def _n(self) -> int:
        return int(self.rng.integers(1, 9))

    def conv(self):
        k = int(self.rng.choice([1, 3, 5]))
        stride, padding = self._window(k)
        n = self._n()
        self.current = self._add("conv", LayerSpec.conv(k, n, stride=stride, padding=padding))
        self.c = n

    def grouped(self):
        if self.c % 2:
            return self.conv()
        n = 2 * int(self.rng.integers(1, 5))
        stride, padding = self._window(3)
        self.current = self._add("gconv", LayerSpec.conv(3, n, stride=stride, padding=padding, groups=2))
        self.c = n

    def pointwise(self):
        n = self._n()
        self.current = self._add("pw", LayerSpec.pointwise(n))
        self.c = n

    def separable(self):
        k = int(self.rng.choice([3, 5]))
        stride, padding = self._window(k)
        self.current = self._add("dw", LayerSpec.depthwise(k, stride=stride, padding=padding))
        self.pointwise()

    def pool(self):
        k = int(self.rng.choice([2, 3]))
        stride, padding = self._window(k)
        factory = LayerSpec.max_pool if self.rng.random() < 0.5 else LayerSpec.avg_pool
        self.current = self._add("pool", factory(k, stride=stride, padding=padding))

    def shuffle_unit(self):
        if self.c < 2:
            return self.pointwise()
        half = self.c // 2
        left = self._add("left", LayerSpec.channel_split(half, 0))
        right = self._add("right", LayerSpec.channel_split(half, 1))
        n = self._n()
        branch = self._add("branch", LayerSpec.pointwise(n), (right,))
        self.current = self._add("cat", LayerSpec.concat(), (left, branch))
        self.c = half + n
        if self.c % 2 == 0:
            self.current = self._add("shuffle", LayerSpec.channel_shuffle(2))

    def residual(self):
        branch = self._add("proj", LayerSpec.pointwise(self.c))
        self.current = self._add("sum", LayerSpec.add(), (self.current, branch))

    def build(self):
        blocks = [self.conv, self.grouped, self.pointwise, self.separable, self.pool, self.shuffle_unit,
                  self.residual]
        for _ in range(int(self.rng.integers(2, 6))):
            blocks[int(self.rng.integers(len(blocks)))]()
        return build_graph(self.input_shape, self.nodes, name="random")
