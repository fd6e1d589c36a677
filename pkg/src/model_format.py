"""
Model description documents.

    # comment
    name fire
    input 56 56 96
    node squeeze Pointwise n=16
    node e1 Pointwise n=64 <- squeeze
    node e3 Conv k=3 n=64 stride=1 padding=same <- squeeze
    node out Concat <- e1 e3

`input` must appear once, before any node. A node without `<-` reads the graph input;
the predecessor name `input` refers to it explicitly.
"""

from pathlib import Path
from typing import Dict, List, Optional

from errors import ModelSemanticError, ModelSyntaxError, PartitionToolError
from graph_ops import build_graph
from model import INPUT_ID, LayerKind, LayerSpec, ModelGraph, Node, TensorShape

_ALLOWED_KEYS = {
    LayerKind.CONV: {"k", "kh", "kw", "n", "stride", "padding", "groups"},
    LayerKind.DEPTHWISE: {"k", "stride", "padding"},
    LayerKind.POINTWISE: {"n"},
    LayerKind.MAX_POOL: {"k", "stride", "padding"},
    LayerKind.AVG_POOL: {"k", "stride", "padding"},
    LayerKind.CONCAT: set(),
    LayerKind.ADD: set(),
    LayerKind.CHANNEL_SPLIT: {"split", "part"},
    LayerKind.CHANNEL_SHUFFLE: {"groups"},
}


def _int(value: str, key: str, line_no: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ModelSyntaxError(f"'{key}' expects an integer, got '{value}'", field=f"line {line_no}") from None


def _spec_from_params(kind: LayerKind, params: Dict[str, str], line_no: int) -> LayerSpec:
    unknown = set(params) - _ALLOWED_KEYS[kind]
    if unknown:
        raise ModelSyntaxError(f"{kind.value} does not accept {sorted(unknown)}", field=f"line {line_no}")
    ints = {key: _int(value, key, line_no) for key, value in params.items() if key != "padding"}
    padding = params.get("padding", "same")

    def required(key: str) -> int:
        if key not in ints:
            raise ModelSyntaxError(f"{kind.value} requires '{key}='", field=f"line {line_no}")
        return ints[key]

    if kind == LayerKind.CONV:
        k = ints.get("k")
        k_h = ints.get("kh", k)
        k_w = ints.get("kw", k)
        if k_h is None or k_w is None:
            raise ModelSyntaxError("Conv requires 'k=' or both 'kh=' and 'kw='", field=f"line {line_no}")
        return LayerSpec.conv(k_h, required("n"), stride=ints.get("stride", 1), padding=padding,
                              groups=ints.get("groups", 1), k_w=k_w)
    if kind == LayerKind.DEPTHWISE:
        return LayerSpec.depthwise(required("k"), stride=ints.get("stride", 1), padding=padding)
    if kind == LayerKind.POINTWISE:
        return LayerSpec.pointwise(required("n"))
    if kind == LayerKind.MAX_POOL:
        return LayerSpec.max_pool(required("k"), stride=ints.get("stride", 1), padding=padding)
    if kind == LayerKind.AVG_POOL:
        return LayerSpec.avg_pool(required("k"), stride=ints.get("stride", 1), padding=padding)
    if kind == LayerKind.CHANNEL_SPLIT:
        return LayerSpec.channel_split(required("split"), required("part"))
    if kind == LayerKind.CHANNEL_SHUFFLE:
        return LayerSpec.channel_shuffle(required("groups"))
    return LayerSpec(kind)


def _parse_node(tokens: List[str], line_no: int) -> Node:
    if len(tokens) < 3:
        raise ModelSyntaxError("expected 'node <id> <kind> [key=value ...] [<- pred ...]'", field=f"line {line_no}")
    layer_id, kind_name = tokens[1], tokens[2]
    rest = tokens[3:]
    preds: List[str] = [INPUT_ID]
    if "<-" in rest:
        arrow = rest.index("<-")
        preds = rest[arrow + 1:]
        rest = rest[:arrow]
        if not preds:
            raise ModelSyntaxError("'<-' must be followed by at least one predecessor", field=f"line {line_no}")
    params: Dict[str, str] = {}
    for token in rest:
        key, sep, value = token.partition("=")
        if not sep or not key or not value:
            raise ModelSyntaxError(f"malformed parameter '{token}'", field=f"line {line_no}")
        if key in params:
            raise ModelSyntaxError(f"parameter '{key}' given twice", field=f"line {line_no}")
        params[key] = value
    try:
        kind = LayerKind.parse(kind_name)
        spec = _spec_from_params(kind, params, line_no)
    except ModelSemanticError as e:
        if e.field is None:
            e.field = layer_id
        raise
    return Node(layer_id, spec, tuple(preds))


def parse_model(text: str, source: Optional[str] = None) -> ModelGraph:
    """Parse a model document into a validated, topologically ordered, shape-annotated graph."""
    name = "model"
    input_shape: Optional[TensorShape] = None
    nodes: List[Node] = []
    try:
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            directive = tokens[0]
            if directive == "name":
                if len(tokens) != 2:
                    raise ModelSyntaxError("expected 'name <identifier>'", field=f"line {line_no}")
                name = tokens[1]
            elif directive == "input":
                if input_shape is not None:
                    raise ModelSyntaxError("'input' given twice", field=f"line {line_no}")
                if nodes:
                    raise ModelSyntaxError("'input' must precede all nodes", field=f"line {line_no}")
                if len(tokens) != 4:
                    raise ModelSyntaxError("expected 'input <h> <w> <c>'", field=f"line {line_no}")
                h, w, c = (_int(t, "input", line_no) for t in tokens[1:])
                input_shape = TensorShape(h, w, c)
            elif directive == "node":
                if input_shape is None:
                    raise ModelSyntaxError("'input' must precede all nodes", field=f"line {line_no}")
                nodes.append(_parse_node(tokens, line_no))
            else:
                raise ModelSyntaxError(f"unknown directive '{directive}'", field=f"line {line_no}")
        if input_shape is None:
            raise ModelSyntaxError("document has no 'input' line")
        return build_graph(input_shape, nodes, name=name)
    except PartitionToolError as e:
        raise e.with_source(source) if source else e


def load_model(path) -> ModelGraph:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ModelSyntaxError(f"not UTF-8 text (byte {e.start})", source=str(path)) from None
    return parse_model(text, source=str(path))


def _format_params(spec: LayerSpec) -> List[str]:
    kind = spec.kind
    if kind == LayerKind.CONV:
        kernel = [f"k={spec.k_h}"] if spec.k_h == spec.k_w else [f"kh={spec.k_h}", f"kw={spec.k_w}"]
        return kernel + [f"n={spec.n}", f"stride={spec.stride}", f"padding={spec.padding}", f"groups={spec.groups}"]
    if kind in (LayerKind.DEPTHWISE, LayerKind.MAX_POOL, LayerKind.AVG_POOL):
        return [f"k={spec.k_h}", f"stride={spec.stride}", f"padding={spec.padding}"]
    if kind == LayerKind.POINTWISE:
        return [f"n={spec.n}"]
    if kind == LayerKind.CHANNEL_SPLIT:
        return [f"split={spec.split}", f"part={spec.part}"]
    if kind == LayerKind.CHANNEL_SHUFFLE:
        return [f"groups={spec.groups}"]
    return []


def serialize_model(graph: ModelGraph) -> str:
    s = graph.input_shape
    lines = [f"name {graph.name}", f"input {s.h} {s.w} {s.c}"]
    for node in graph.nodes:
        parts = ["node", node.layer_id, node.spec.kind.value, *_format_params(node.spec), "<-", *node.inputs]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"
