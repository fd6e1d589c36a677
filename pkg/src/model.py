from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Tuple

from errors import ModelSemanticError, ShapeError

INPUT_ID = "input"


class LayerKind(str, Enum):
    CONV = "Conv"
    DEPTHWISE = "DepthwiseConv"
    POINTWISE = "Pointwise"
    MAX_POOL = "MaxPool"
    AVG_POOL = "AvgPool"
    CONCAT = "Concat"
    ADD = "Add"
    CHANNEL_SPLIT = "ChannelSplit"
    CHANNEL_SHUFFLE = "ChannelShuffle"

    @classmethod
    def parse(cls, name: str) -> "LayerKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ModelSemanticError(f"unknown layer kind '{name}'. Allowed: {[k.value for k in cls]}")


PARAMETRIC_KINDS = frozenset({LayerKind.CONV, LayerKind.DEPTHWISE, LayerKind.POINTWISE})
POOL_KINDS = frozenset({LayerKind.MAX_POOL, LayerKind.AVG_POOL})
WINDOWED_KINDS = PARAMETRIC_KINDS | POOL_KINDS
MULTI_INPUT_KINDS = frozenset({LayerKind.CONCAT, LayerKind.ADD})
PADDINGS = ("same", "valid")


@dataclass(frozen=True)
class TensorShape:
    """An h x w x c activation tensor of 8-bit elements."""
    h: int
    w: int
    c: int

    def __post_init__(self):
        for name in ("h", "w", "c"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ShapeError(f"tensor dimension {name} must be a positive integer, got {value!r}")

    @property
    def byte_size(self) -> int:
        return self.h * self.w * self.c

    @property
    def pixels(self) -> int:
        return self.h * self.w

    def with_channels(self, c: int) -> "TensorShape":
        return TensorShape(self.h, self.w, c)

    def __str__(self) -> str:
        return f"{self.h}x{self.w}x{self.c}"


@dataclass(frozen=True)
class LayerSpec:
    """
    Operator parameters. Unused fields keep their defaults so that specs compare by value.

    `groups` is the convolution group count for Conv and the shuffle group count for
    ChannelShuffle. `split`/`part` select the channel slice of a ChannelSplit.
    """
    kind: LayerKind
    k_h: int = 1
    k_w: int = 1
    n: int = 0
    stride: int = 1
    padding: str = "same"
    groups: int = 1
    split: int = 0
    part: int = 0

    def __post_init__(self):
        kind = self.kind
        if self.padding not in PADDINGS:
            raise ModelSemanticError(f"{kind.value}: padding must be one of {PADDINGS}, got '{self.padding}'")
        for name in ("k_h", "k_w", "stride", "groups"):
            if getattr(self, name) < 1:
                raise ModelSemanticError(f"{kind.value}: {name} must be positive, got {getattr(self, name)}")
        if kind in (LayerKind.CONV, LayerKind.POINTWISE) and self.n < 1:
            raise ModelSemanticError(f"{kind.value}: output channel count n must be positive, got {self.n}")
        if kind == LayerKind.CONV and self.n % self.groups:
            raise ModelSemanticError(f"Conv: groups={self.groups} does not divide n={self.n}")
        if kind == LayerKind.POINTWISE and (self.k_h, self.k_w, self.stride, self.groups) != (1, 1, 1, 1):
            raise ModelSemanticError("Pointwise is a 1x1, stride 1, ungrouped convolution")
        if kind == LayerKind.DEPTHWISE and self.k_h != self.k_w:
            raise ModelSemanticError("DepthwiseConv kernels are square")
        if kind == LayerKind.CHANNEL_SPLIT:
            if self.split < 1:
                raise ModelSemanticError(f"ChannelSplit: split must be positive, got {self.split}")
            if self.part not in (0, 1):
                raise ModelSemanticError(f"ChannelSplit: part must be 0 or 1, got {self.part}")

    @classmethod
    def conv(cls, k: int, n: int, stride: int = 1, padding: str = "same", groups: int = 1,
             k_w: Optional[int] = None) -> "LayerSpec":
        return cls(LayerKind.CONV, k_h=k, k_w=k if k_w is None else k_w, n=n, stride=stride,
                   padding=padding, groups=groups)

    @classmethod
    def depthwise(cls, k: int, stride: int = 1, padding: str = "same") -> "LayerSpec":
        return cls(LayerKind.DEPTHWISE, k_h=k, k_w=k, stride=stride, padding=padding)

    @classmethod
    def pointwise(cls, n: int) -> "LayerSpec":
        return cls(LayerKind.POINTWISE, n=n)

    @classmethod
    def max_pool(cls, k: int, stride: int = 1, padding: str = "same") -> "LayerSpec":
        return cls(LayerKind.MAX_POOL, k_h=k, k_w=k, stride=stride, padding=padding)

    @classmethod
    def avg_pool(cls, k: int, stride: int = 1, padding: str = "same") -> "LayerSpec":
        return cls(LayerKind.AVG_POOL, k_h=k, k_w=k, stride=stride, padding=padding)

    @classmethod
    def concat(cls) -> "LayerSpec":
        return cls(LayerKind.CONCAT)

    @classmethod
    def add(cls) -> "LayerSpec":
        return cls(LayerKind.ADD)

    @classmethod
    def channel_split(cls, split: int, part: int) -> "LayerSpec":
        return cls(LayerKind.CHANNEL_SPLIT, split=split, part=part)

    @classmethod
    def channel_shuffle(cls, groups: int) -> "LayerSpec":
        return cls(LayerKind.CHANNEL_SHUFFLE, groups=groups)

    @property
    def is_parametric(self) -> bool:
        return self.kind in PARAMETRIC_KINDS

    @property
    def is_windowed(self) -> bool:
        return self.kind in WINDOWED_KINDS


@dataclass(frozen=True)
class Node:
    layer_id: str
    spec: LayerSpec
    inputs: Tuple[str, ...] = (INPUT_ID,)


@dataclass(frozen=True)
class ModelGraph:
    """
    Topologically ordered CNN graph. `shapes` holds one output shape per node once
    shape inference has run; graphs are never mutated, annotation returns a copy.
    """
    input_shape: TensorShape
    nodes: Tuple[Node, ...]
    shapes: Optional[Tuple[TensorShape, ...]] = None
    name: str = "model"

    @cached_property
    def _index(self) -> Dict[str, int]:
        return {node.layer_id: i for i, node in enumerate(self.nodes)}

    @cached_property
    def consumers(self) -> Dict[str, Tuple[str, ...]]:
        result: Dict[str, List[str]] = {node.layer_id: [] for node in self.nodes}
        for node in self.nodes:
            for pred in dict.fromkeys(node.inputs):
                if pred in result:
                    result[pred].append(node.layer_id)
        return {key: tuple(value) for key, value in result.items()}

    @property
    def layer_ids(self) -> List[str]:
        return [node.layer_id for node in self.nodes]

    @property
    def annotated(self) -> bool:
        return self.shapes is not None

    @property
    def output_id(self) -> Optional[str]:
        return self.nodes[-1].layer_id if self.nodes else None

    def has_node(self, layer_id: str) -> bool:
        return layer_id in self._index

    def index(self, layer_id: str) -> int:
        try:
            return self._index[layer_id]
        except KeyError:
            raise KeyError(f"Node '{layer_id}' not found in graph '{self.name}'") from None

    def node(self, layer_id: str) -> Node:
        return self.nodes[self.index(layer_id)]

    def shape_of(self, layer_id: str) -> TensorShape:
        if layer_id == INPUT_ID:
            return self.input_shape
        if self.shapes is None:
            raise ShapeError(f"graph '{self.name}' has no inferred shapes")
        return self.shapes[self.index(layer_id)]

    def input_shapes(self, node: Node) -> List[TensorShape]:
        return [self.shape_of(pred) for pred in node.inputs]

    def in_shape(self, layer_id: str) -> TensorShape:
        """Shape of the first input; the only input for windowed kinds."""
        return self.shape_of(self.node(layer_id).inputs[0])

    @property
    def output_shape(self) -> TensorShape:
        return self.input_shape if not self.nodes else self.shape_of(self.nodes[-1].layer_id)

    def with_shapes(self, shapes: Tuple[TensorShape, ...]) -> "ModelGraph":
        return replace(self, shapes=tuple(shapes))
