"""
Row-streaming kernels modelling the direct-hardware-mapped FPGA path.

The input feature map enters one row at a time. A line buffer keeps the last k_h padded
rows; every time it holds a complete window aligned with the stride, one output row of
accumulators is produced. Results are bit-identical to the reference kernels.
"""

from collections import deque
from typing import Callable, Iterator

import numpy as np

from graph_ops import padding_for, spatial_out
from model import LayerKind, LayerSpec, TensorShape
from .kernels import check_operands
from .tensor import FxpKernel, FxpTensor, requantize, wrap_int32


class LineBuffer:
    """Sliding window of k_h padded input rows."""

    def __init__(self, spec: LayerSpec, in_shape: TensorShape):
        self.spec = spec
        self.in_shape = in_shape
        (self.pad_top, self.pad_bottom), (self.pad_left, self.pad_right) = padding_for(spec, in_shape)
        self.h_out, self.w_out = spatial_out(spec, in_shape)
        self.padded_width = in_shape.w + self.pad_left + self.pad_right
        self._rows = deque(maxlen=spec.k_h)
        self._pushed = 0
        self._emitted = 0

    @property
    def capacity_bytes(self) -> int:
        """On-chip storage of the k_h - 1 rows held back while the next row streams in."""
        return (self.spec.k_h - 1) * self.in_shape.w * self.in_shape.c

    def _blank_row(self) -> np.ndarray:
        return np.zeros((self.padded_width, self.in_shape.c), dtype=np.int64)

    def _push_padded(self, row: np.ndarray):
        self._rows.append(row)
        index = self._pushed
        self._pushed += 1
        ready = index >= self.spec.k_h - 1 and (index - (self.spec.k_h - 1)) % self.spec.stride == 0
        if ready and self._emitted < self.h_out:
            self._emitted += 1
            return np.stack(self._rows)
        return None

    def push(self, row: np.ndarray) -> Iterator[np.ndarray]:
        """Feed one input row (w, c); yields each (k_h, padded_w, c) window it completes."""
        if self._pushed == 0:
            for _ in range(self.pad_top):
                window = self._push_padded(self._blank_row())
                if window is not None:
                    yield window
        padded = self._blank_row()
        padded[self.pad_left:self.pad_left + self.in_shape.w, :] = row
        window = self._push_padded(padded)
        if window is not None:
            yield window

    def flush(self) -> Iterator[np.ndarray]:
        for _ in range(self.pad_bottom):
            window = self._push_padded(self._blank_row())
            if window is not None:
                yield window


def _stream(ifm: FxpTensor, spec: LayerSpec,
            row_kernel: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    buffer = LineBuffer(spec, ifm.shape)
    rows = []
    for y in range(ifm.shape.h):
        rows.extend(row_kernel(window) for window in buffer.push(ifm.values[y].astype(np.int64)))
    rows.extend(row_kernel(window) for window in buffer.flush())
    return wrap_int32(np.stack(rows))


def _columns(window_row: np.ndarray, kx: int, stride: int, w_out: int) -> np.ndarray:
    return window_row[kx:kx + stride * (w_out - 1) + 1:stride, :]


def stream_conv_accumulate(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> np.ndarray:
    """Accumulators of a Conv or Pointwise layer computed row by row through a line buffer."""
    check_operands(ifm, kernel, spec)
    weights = kernel.values.astype(np.int64)
    _, _, c_group, n = weights.shape
    groups = spec.groups if spec.kind == LayerKind.CONV else 1
    n_group = n // groups
    _, w_out = spatial_out(spec, ifm.shape)

    def row_kernel(window: np.ndarray) -> np.ndarray:
        out = np.zeros((w_out, n), dtype=np.int64)
        for g in range(groups):
            cin = slice(g * c_group, (g + 1) * c_group)
            cout = slice(g * n_group, (g + 1) * n_group)
            for ky in range(spec.k_h):
                for kx in range(spec.k_w):
                    taps = _columns(window[ky], kx, spec.stride, w_out)[:, cin]
                    out[:, cout] += taps @ weights[ky, kx, :, cout]
        return out

    return _stream(ifm, spec, row_kernel)


def stream_depthwise_accumulate(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> np.ndarray:
    check_operands(ifm, kernel, spec)
    weights = kernel.values.astype(np.int64)
    _, w_out = spatial_out(spec, ifm.shape)

    def row_kernel(window: np.ndarray) -> np.ndarray:
        out = np.zeros((w_out, ifm.shape.c), dtype=np.int64)
        for ky in range(spec.k_h):
            for kx in range(spec.k_w):
                out += _columns(window[ky], kx, spec.stride, w_out) * weights[ky, kx, :]
        return out

    return _stream(ifm, spec, row_kernel)


def stream_conv2d(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> FxpTensor:
    return FxpTensor(requantize(stream_conv_accumulate(ifm, kernel, spec), ifm.fraction_bits), ifm.fraction_bits)


def stream_depthwise_conv2d(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> FxpTensor:
    return FxpTensor(requantize(stream_depthwise_accumulate(ifm, kernel, spec), ifm.fraction_bits),
                     ifm.fraction_bits)
