from errors import ModelSemanticError
from graph_ops import build_graph
from model import INPUT_ID, LayerSpec, ModelGraph, Node, TensorShape
from .templates_manager import template


def _require_even(value: int, name: str):
    if value % 2:
        raise ModelSemanticError(f"{name} must be even to split into two branches, got {value}", field=name)


@template
def shufflenet_unit(h: int, w: int, c: int) -> ModelGraph:
    """Channel split, 1x1 -> 3x3 depthwise -> 1x1 on one half, concat, shuffle."""
    _require_even(c, "c")
    half = c // 2
    return build_graph(TensorShape(h, w, c), [
        Node("split_left", LayerSpec.channel_split(half, 0)),
        Node("split_right", LayerSpec.channel_split(half, 1)),
        Node("pw1", LayerSpec.pointwise(half), ("split_right",)),
        Node("dw", LayerSpec.depthwise(3), ("pw1",)),
        Node("pw2", LayerSpec.pointwise(half), ("dw",)),
        Node("concat", LayerSpec.concat(), ("split_left", "pw2")),
        Node("shuffle", LayerSpec.channel_shuffle(2), ("concat",)),
    ], name="shufflenet_unit")


@template
def shufflenet_unit_down(out_channels: int, h: int, w: int, c: int) -> ModelGraph:
    """Spatial-reduction unit: both branches carry a stride-2 depthwise conv."""
    _require_even(out_channels, "out_channels")
    half = out_channels // 2
    return build_graph(TensorShape(h, w, c), [
        Node("left_dw", LayerSpec.depthwise(3, stride=2), (INPUT_ID,)),
        Node("left_pw", LayerSpec.pointwise(half), ("left_dw",)),
        Node("right_pw1", LayerSpec.pointwise(half), (INPUT_ID,)),
        Node("right_dw", LayerSpec.depthwise(3, stride=2), ("right_pw1",)),
        Node("right_pw2", LayerSpec.pointwise(half), ("right_dw",)),
        Node("concat", LayerSpec.concat(), ("left_pw", "right_pw2")),
        Node("shuffle", LayerSpec.channel_shuffle(2), ("concat",)),
    ], name="shufflenet_unit_down")
