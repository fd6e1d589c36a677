"""
Report documents and the tables derived from them.

report.json   CostReport, see simulator.CostReport
stages.csv    one row per stage, columns STAGE_COLUMNS
gains.csv     one row per workload, columns GAIN_COLUMNS
gains.txt     the same rows aligned for reading, gains as "1.34x"
"""

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

from pydantic import ValidationError

from errors import ReportError
from log.log_util import load_json, save_json
from simulator import CostReport, ReportVersion

STAGE_COLUMNS = ["stage_id", "mode", "layers", "gpu_latency_s", "fpga_latency_s", "comm_latency_s",
                 "crossing_latency_s", "stage_latency_s", "energy_j", "bytes_transferred"]
GAIN_COLUMNS = ["workload", "energy_gain", "speedup", "energy_reduction", "latency_reduction"]


def save_report(path, report: CostReport):
    save_json(path, report.model_dump(mode="json"))


def load_report(path) -> CostReport:
    source = str(Path(path))
    if not os.path.exists(source):
        raise ReportError("file not found", source=source)
    try:
        data = load_json(source)
    except json.JSONDecodeError as e:
        raise ReportError(f"invalid JSON: {e.msg}", source=source, field=f"line {e.lineno}") from None
    except UnicodeDecodeError as e:
        raise ReportError(f"not UTF-8 text (byte {e.start})", source=source) from None
    version = data.get("schema_version") if isinstance(data, dict) else None
    if version != ReportVersion.CURRENT.value:
        raise ReportError(f"unsupported report schema '{version}', expected '{ReportVersion.CURRENT.value}'",
                          source=source, field="schema_version")
    try:
        return CostReport.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ReportError(first["msg"], source=source, field=".".join(str(p) for p in first["loc"])) from None


def write_stage_table(path, report: CostReport):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(STAGE_COLUMNS)
        for stage in report.stages:
            writer.writerow([stage.stage_id, stage.mode.value, "+".join(stage.layers),
                             repr(stage.gpu_latency_s), repr(stage.fpga_latency_s), repr(stage.comm_latency_s),
                             repr(stage.crossing_latency_s), repr(stage.stage_latency_s), repr(stage.energy_j),
                             stage.bytes_transferred])


@dataclass(frozen=True)
class GainRow:
    workload: str
    energy_gain: float
    speedup: float
    energy_reduction: float
    latency_reduction: float


def format_gain(value: float) -> str:
    return f"{value:.2f}x"


def format_percent(value: float) -> str:
    return f"{value * 100:.1f}%"


def gain_rows(reports: Iterable[CostReport]) -> List[GainRow]:
    rows = []
    for report in reports:
        if report.baseline is None or report.energy_gain is None:
            raise ReportError("report carries no GPU-only baseline", field=report.workload)
        rows.append(GainRow(report.workload, report.energy_gain, report.speedup,
                            report.energy_reduction, report.latency_reduction))
    return rows


def write_gain_table(path, rows: List[GainRow]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(GAIN_COLUMNS)
        for row in rows:
            writer.writerow([row.workload, format_gain(row.energy_gain), format_gain(row.speedup),
                             format_percent(row.energy_reduction), format_percent(row.latency_reduction)])


def format_gain_table(rows: List[GainRow]) -> str:
    header = ["workload", "energy gain", "speedup", "energy reduction", "latency reduction"]
    cells = [[row.workload, format_gain(row.energy_gain), format_gain(row.speedup),
              format_percent(row.energy_reduction), format_percent(row.latency_reduction)] for row in rows]
    widths = [max(len(line[i]) for line in [header] + cells) for i in range(len(header))]
    lines = ["  ".join(value.ljust(width) for value, width in zip(line, widths)).rstrip()
             for line in [header] + cells]
    return "\n".join(lines) + "\n"
