from model import ModelGraph
from planner.decisions import ChannelSplit, DwSplit, FpgaWhole, PartitionPlan


def _shorten(items, limit: int) -> str:
    items = list(items)
    if len(items) <= limit:
        return ", ".join(items)
    return ", ".join(items[:limit]) + f", ... (+{len(items) - limit})"


def format_graph_context(graph: ModelGraph, verbosity: int) -> str:
    try:
        text = f"{graph.name}: {len(graph.nodes)} nodes, input {graph.input_shape}"
        if verbosity >= 2 and graph.nodes:
            text += f", output {graph.output_shape}"
        if verbosity >= 3:
            text += f" [{_shorten((f'{n.layer_id}:{n.spec.kind.value}' for n in graph.nodes), 24)}]"
        return text
    except Exception:
        return "context unavailable"


def _describe(decision) -> str:
    if isinstance(decision, FpgaWhole):
        return f"fpga({decision.fused_group_id})"
    if isinstance(decision, ChannelSplit):
        return f"split(g={decision.g})"
    if isinstance(decision, DwSplit):
        return f"dwsplit({decision.partner})"
    return "gpu"


def format_plan_context(plan: PartitionPlan, verbosity: int) -> str:
    try:
        mapped = [layer_id for layer_id, d in plan.decisions.items() if d.kind != "GpuOnly"]
        usage = plan.resource_usage
        text = f"objective {plan.objective}, {len(mapped)}/{len(plan.decisions)} nodes off the GPU"
        if verbosity >= 2:
            text += f", {usage.macs} multipliers, {usage.memory_bytes} bytes on chip"
        if verbosity >= 3:
            limit = len(plan.decisions)
        else:
            limit = 6
        if verbosity >= 2 and mapped:
            text += f" [{_shorten((f'{i}={_describe(plan.decisions[i])}' for i in mapped), limit)}]"
        return text
    except Exception:
        return "context unavailable"


def format_stage_context(stage, verbosity: int) -> str:
    try:
        text = (f"{stage.stage_id} ({stage.mode.value}): {stage.stage_latency_s * 1e6:.3f} us, "
                f"{stage.energy_j * 1e6:.3f} uJ")
        if verbosity >= 3:
            text += (f" gpu={stage.gpu_latency_s * 1e6:.3f} fpga={stage.fpga_latency_s * 1e6:.3f} "
                     f"comm={stage.comm_latency_s * 1e6:.3f} crossing={stage.crossing_latency_s * 1e6:.3f} "
                     f"bytes={stage.bytes_transferred}")
        return text
    except Exception:
        return "context unavailable"
