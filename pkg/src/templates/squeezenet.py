from graph_ops import build_graph
from model import LayerSpec, ModelGraph, Node, TensorShape
from .templates_manager import template


@template
def fire(s1: int, e1: int, e3: int, h: int, w: int, c: int) -> ModelGraph:
    """Squeeze 1x1, then parallel 1x1 and 3x3 expands concatenated."""
    return build_graph(TensorShape(h, w, c), [
        Node("squeeze", LayerSpec.pointwise(s1)),
        Node("expand1x1", LayerSpec.pointwise(e1), ("squeeze",)),
        Node("expand3x3", LayerSpec.conv(3, e3), ("squeeze",)),
        Node("concat", LayerSpec.concat(), ("expand1x1", "expand3x3")),
    ], name="fire")
