"""
GPU calibration tables.

    # synthetic: shaped to the measured trend, not measured
    op_kind,h,w,c_in,k,n,latency_us,power_mw
    Conv,224,224,3,3,64,4535.2064,5000

A row describes the layer applied with stride 1 and same padding to an h x w x c_in
input. Rows are interpolated piecewise-linearly in work, the layer's MAC count (window
comparisons for pools, output elements for data-movement kinds), and extrapolated
linearly past both ends. Latency and power never drop below the kind's smallest row value.
"""

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from errors import CalibrationError, ModelSemanticError
from model import LayerKind

HEADER = ("op_kind", "h", "w", "c_in", "k", "n", "latency_us", "power_mw")


def row_work(op_kind: LayerKind, h: int, w: int, c_in: int, k: int, n: int) -> int:
    if op_kind == LayerKind.CONV:
        return h * w * k * k * c_in * n
    if op_kind == LayerKind.POINTWISE:
        return h * w * c_in * n
    if op_kind in (LayerKind.DEPTHWISE, LayerKind.MAX_POOL, LayerKind.AVG_POOL):
        return h * w * k * k * c_in
    if op_kind == LayerKind.CHANNEL_SPLIT:
        return h * w * n
    return h * w * c_in


@dataclass(frozen=True)
class CalibrationRow:
    op_kind: str
    h: int
    w: int
    c_in: int
    k: int
    n: int
    latency_s: float
    power_w: float

    @property
    def work(self) -> int:
        return row_work(LayerKind(self.op_kind), self.h, self.w, self.c_in, self.k, self.n)


@dataclass(frozen=True)
class GpuCalibrationTable:
    """Rows sorted by (op_kind, work)."""
    rows: Tuple[CalibrationRow, ...]
    source: Optional[str] = None

    @cached_property
    def _curves(self) -> Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        curves = {}
        for kind in dict.fromkeys(row.op_kind for row in self.rows):
            rows = [row for row in self.rows if row.op_kind == kind]
            curves[kind] = (np.array([row.work for row in rows], dtype=np.float64),
                            np.array([row.latency_s for row in rows], dtype=np.float64),
                            np.array([row.power_w for row in rows], dtype=np.float64))
        return curves

    @property
    def op_kinds(self) -> Tuple[str, ...]:
        return tuple(self._curves)

    def lookup(self, op_kind: str, work: int) -> Tuple[float, float]:
        """(latency_s, power_w) at `work`."""
        if op_kind not in self._curves:
            raise CalibrationError(f"no calibration rows for op_kind '{op_kind}'", source=self.source,
                                   field="op_kind")
        works, latencies, powers = self._curves[op_kind]
        return (_interpolate(works, latencies, work), _interpolate(works, powers, work))


def _interpolate(xs: np.ndarray, ys: np.ndarray, x: float) -> float:
    if xs[0] <= x <= xs[-1]:
        value = float(np.interp(x, xs, ys))
    else:
        i = 0 if x < xs[0] else len(xs) - 2
        slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
        value = float(ys[i] + slope * (x - xs[i]))
    return max(value, float(ys.min()))


def _parse_int(text: str, column: str, line_no: int, source: Optional[str]) -> int:
    try:
        value = int(text)
    except ValueError:
        raise CalibrationError(f"{column} expects an integer, got '{text}'", source=source,
                               field=f"line {line_no}: {column}") from None
    if value < 1:
        raise CalibrationError(f"{column} must be positive, got {value}", source=source,
                               field=f"line {line_no}: {column}")
    return value


def _parse_positive(text: str, column: str, line_no: int, source: Optional[str]) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CalibrationError(f"{column} expects a number, got '{text}'", source=source,
                               field=f"line {line_no}: {column}") from None
    if not np.isfinite(value) or value <= 0:
        raise CalibrationError(f"{column} must be positive, got {text}", source=source,
                               field=f"line {line_no}: {column}")
    return value


def load_calibration(text: str, source: Optional[str] = None) -> GpuCalibrationTable:
    """Parse and validate a calibration document. Comment lines start with `#`."""
    lines = [(i, line) for i, line in enumerate(text.splitlines(), start=1)
             if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise CalibrationError("calibration document is empty", source=source)
    header_line, header = lines[0]
    columns = tuple(cell.strip() for cell in next(csv.reader([header])))
    if columns != HEADER:
        raise CalibrationError(f"header must be '{','.join(HEADER)}'", source=source, field=f"line {header_line}")

    rows = []
    reader = csv.reader(io.StringIO("\n".join(line for _, line in lines[1:])))
    for (line_no, _), cells in zip(lines[1:], reader):
        cells = [cell.strip() for cell in cells]
        if len(cells) != len(HEADER):
            raise CalibrationError(f"expected {len(HEADER)} columns, got {len(cells)}", source=source,
                                   field=f"line {line_no}")
        try:
            kind = LayerKind.parse(cells[0])
        except ModelSemanticError as e:
            raise CalibrationError(e.message, source=source, field=f"line {line_no}: op_kind") from None
        h, w, c_in, k, n = (_parse_int(cells[i], HEADER[i], line_no, source) for i in range(1, 6))
        latency_us = _parse_positive(cells[6], "latency_us", line_no, source)
        power_mw = _parse_positive(cells[7], "power_mw", line_no, source)
        rows.append((line_no, CalibrationRow(kind.value, h, w, c_in, k, n, latency_us * 1e-6, power_mw * 1e-3)))

    by_kind: Dict[str, list] = {}
    for line_no, row in rows:
        by_kind.setdefault(row.op_kind, []).append((line_no, row))
    for kind, entries in by_kind.items():
        if len(entries) < 2:
            raise CalibrationError(f"op_kind '{kind}' needs at least 2 rows for interpolation", source=source,
                                   field=f"line {entries[0][0]}")
        seen = {}
        for line_no, row in entries:
            if row.work in seen:
                raise CalibrationError(f"same work ({row.work}) as line {seen[row.work]} for op_kind '{kind}'",
                                       source=source, field=f"line {line_no}")
            seen[row.work] = line_no

    ordered = sorted((row for _, row in rows), key=lambda row: (row.op_kind, row.work))
    return GpuCalibrationTable(rows=tuple(ordered), source=source)


def read_calibration(path) -> GpuCalibrationTable:
    path = Path(path)
    if not path.exists():
        raise CalibrationError("file not found", source=str(path))
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise CalibrationError(f"not UTF-8 text (byte {e.start})", source=str(path)) from None
    return load_calibration(text, source=str(path))
