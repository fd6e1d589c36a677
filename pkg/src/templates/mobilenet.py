from errors import ModelSemanticError
from graph_ops import build_graph
from model import INPUT_ID, LayerSpec, ModelGraph, Node, TensorShape
from .templates_manager import template


@template
def bottleneck(out_channels: int, expansion: int, stride: int, h: int, w: int, c: int) -> ModelGraph:
    """Inverted residual: 1x1 expand, 3x3 depthwise, 1x1 project, residual Add when shapes allow."""
    if stride not in (1, 2):
        raise ModelSemanticError(f"bottleneck stride must be 1 or 2, got {stride}", field="stride")
    nodes = [
        Node("expand", LayerSpec.pointwise(c * expansion)),
        Node("depthwise", LayerSpec.depthwise(3, stride=stride), ("expand",)),
        Node("project", LayerSpec.pointwise(out_channels), ("depthwise",)),
    ]
    if stride == 1 and c == out_channels:
        nodes.append(Node("residual", LayerSpec.add(), (INPUT_ID, "project")))
    return build_graph(TensorShape(h, w, c), nodes, name="bottleneck")
