"""
Reference (GPU-side) fixed-point kernels.

Convolutions first produce 32-bit accumulators, then requantize once. Integer sums are
exact and wrap modulo 2**32, so every accumulation order yields the same bits; the
loops below run taps (ky, kx) outermost and reduce channels inside each tap.
"""

from dataclasses import replace
from typing import Sequence, Tuple

import numpy as np

from errors import FxpError
from graph_ops import padding_for, spatial_out, weight_dims
from model import LayerKind, LayerSpec, TensorShape
from .tensor import FxpKernel, FxpTensor, INT8_MAX, INT8_MIN, PartialOfm, requantize, wrap_int32


def check_operands(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec):
    if ifm.fraction_bits != kernel.fraction_bits:
        raise FxpError(f"fraction bits differ: ifm f={ifm.fraction_bits}, weights f={kernel.fraction_bits}")
    if spec.kind == LayerKind.CONV and ifm.shape.c % spec.groups:
        raise FxpError(f"groups={spec.groups} does not divide input channels {ifm.shape.c}")
    expected = weight_dims(spec, ifm.shape)
    if expected is None:
        raise FxpError(f"{spec.kind.value} has no weights")
    if kernel.dims != expected:
        raise FxpError(f"weights are {kernel.dims}, {spec.kind.value} on {ifm.shape} needs {expected}")


def pad_input(values: np.ndarray, spec: LayerSpec, fill: int = 0) -> np.ndarray:
    (top, bottom), (left, right) = padding_for(spec, TensorShape(*values.shape))
    return np.pad(values, ((top, bottom), (left, right), (0, 0)), constant_values=fill)


def _tap(padded: np.ndarray, ky: int, kx: int, stride: int, h_o: int, w_o: int) -> np.ndarray:
    return padded[ky:ky + stride * (h_o - 1) + 1:stride, kx:kx + stride * (w_o - 1) + 1:stride, :]


def conv_accumulate(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> np.ndarray:
    """32-bit accumulators of a (grouped) Conv or Pointwise layer, shape (H_O, W_O, N)."""
    check_operands(ifm, kernel, spec)
    h_o, w_o = spatial_out(spec, ifm.shape)
    padded = pad_input(ifm.values, spec).astype(np.int64)
    weights = kernel.values.astype(np.int64)
    _, _, c_group, n = weights.shape
    n_group = n // spec.groups
    acc = np.zeros((h_o, w_o, n), dtype=np.int64)
    for g in range(spec.groups):
        cin = slice(g * c_group, (g + 1) * c_group)
        cout = slice(g * n_group, (g + 1) * n_group)
        for ky in range(spec.k_h):
            for kx in range(spec.k_w):
                window = _tap(padded, ky, kx, spec.stride, h_o, w_o)[:, :, cin]
                acc[:, :, cout] += np.tensordot(window, weights[ky, kx, :, cout], axes=([2], [0]))
    return wrap_int32(acc)


def depthwise_accumulate(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> np.ndarray:
    check_operands(ifm, kernel, spec)
    h_o, w_o = spatial_out(spec, ifm.shape)
    padded = pad_input(ifm.values, spec).astype(np.int64)
    weights = kernel.values.astype(np.int64)
    acc = np.zeros((h_o, w_o, ifm.shape.c), dtype=np.int64)
    for ky in range(spec.k_h):
        for kx in range(spec.k_w):
            acc += _tap(padded, ky, kx, spec.stride, h_o, w_o) * weights[ky, kx, :]
    return wrap_int32(acc)


def conv2d(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> FxpTensor:
    return FxpTensor(requantize(conv_accumulate(ifm, kernel, spec), ifm.fraction_bits), ifm.fraction_bits)


def depthwise_conv2d(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> FxpTensor:
    return FxpTensor(requantize(depthwise_accumulate(ifm, kernel, spec), ifm.fraction_bits), ifm.fraction_bits)


def grouped_conv2d(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec) -> FxpTensor:
    """Each group convolves its C_I/G channels into its N/G outputs; results are concatenated."""
    groups = spec.groups
    if ifm.shape.c % groups or spec.n % groups:
        raise FxpError(f"groups={groups} must divide input channels {ifm.shape.c} and n={spec.n}")
    c_group, n_group = ifm.shape.c // groups, spec.n // groups
    group_spec = replace(spec, groups=1, n=n_group)
    outputs = []
    for g in range(groups):
        part = slice_channels(ifm, g * c_group, (g + 1) * c_group)
        weights = FxpKernel(kernel.values[:, :, :, g * n_group:(g + 1) * n_group], kernel.fraction_bits)
        outputs.append(conv2d(part, weights, group_spec))
    return concat(outputs)


def slice_channels(tensor: FxpTensor, start: int, stop: int) -> FxpTensor:
    return FxpTensor(tensor.values[:, :, start:stop], tensor.fraction_bits)


def split_operands(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec, g: int
                   ) -> Tuple[Tuple[FxpTensor, FxpKernel], Tuple[FxpTensor, FxpKernel]]:
    """((first C_I - g channels, kernel slice), (last g channels, kernel slice)) of an ungrouped Conv."""
    c = ifm.shape.c
    if spec.kind not in (LayerKind.CONV, LayerKind.POINTWISE) or spec.groups != 1:
        raise FxpError("channel splits apply to ungrouped convolutions only")
    if not 0 < g < c:
        raise FxpError(f"split g={g} must satisfy 0 < g < {c}")
    check_operands(ifm, kernel, spec)
    cut = c - g
    a = (slice_channels(ifm, 0, cut), FxpKernel(kernel.values[:, :, :cut, :], kernel.fraction_bits))
    b = (slice_channels(ifm, cut, c), FxpKernel(kernel.values[:, :, cut:, :], kernel.fraction_bits))
    return a, b


def channel_split_conv(ifm: FxpTensor, kernel: FxpKernel, spec: LayerSpec, g: int) -> Tuple[PartialOfm, PartialOfm]:
    (ifm_a, k_a), (ifm_b, k_b) = split_operands(ifm, kernel, spec, g)
    f = ifm.fraction_bits
    return PartialOfm(conv_accumulate(ifm_a, k_a, spec), f), PartialOfm(conv_accumulate(ifm_b, k_b, spec), f)


def combine_partials(pair: Sequence[PartialOfm]) -> FxpTensor:
    """Sum accumulators elementwise, then requantize once."""
    first = pair[0]
    for other in pair[1:]:
        if other.fraction_bits != first.fraction_bits or other.acc.shape != first.acc.shape:
            raise FxpError("partials disagree in shape or fraction bits")
    total = sum(p.acc.astype(np.int64) for p in pair)
    return FxpTensor(requantize(total, first.fraction_bits), first.fraction_bits)


def max_pool2d(ifm: FxpTensor, spec: LayerSpec) -> FxpTensor:
    """Padded taps never win: every same-padded window holds at least one real pixel."""
    h_o, w_o = spatial_out(spec, ifm.shape)
    padded = pad_input(ifm.values, spec, fill=INT8_MIN)
    out = np.full((h_o, w_o, ifm.shape.c), INT8_MIN, dtype=np.int8)
    for ky in range(spec.k_h):
        for kx in range(spec.k_w):
            out = np.maximum(out, _tap(padded, ky, kx, spec.stride, h_o, w_o))
    return FxpTensor(out, ifm.fraction_bits)


def avg_pool2d(ifm: FxpTensor, spec: LayerSpec) -> FxpTensor:
    """Zero-padded window sum floor-divided by k_h * k_w."""
    h_o, w_o = spatial_out(spec, ifm.shape)
    padded = pad_input(ifm.values, spec).astype(np.int64)
    total = np.zeros((h_o, w_o, ifm.shape.c), dtype=np.int64)
    for ky in range(spec.k_h):
        for kx in range(spec.k_w):
            total += _tap(padded, ky, kx, spec.stride, h_o, w_o)
    return FxpTensor(np.floor_divide(total, spec.k_h * spec.k_w).astype(np.int8), ifm.fraction_bits)


def _check_same_fraction(tensors: Sequence[FxpTensor]):
    if len({t.fraction_bits for t in tensors}) != 1:
        raise FxpError("inputs carry different fraction bits")


def add(tensors: Sequence[FxpTensor]) -> FxpTensor:
    """Exact sum of all inputs, saturated once."""
    _check_same_fraction(tensors)
    first = tensors[0]
    for other in tensors[1:]:
        if other.values.shape != first.values.shape:
            raise FxpError(f"Add input shapes differ: {first.shape} vs {other.shape}")
    total = sum(t.values.astype(np.int32) for t in tensors)
    return FxpTensor(np.clip(total, INT8_MIN, INT8_MAX).astype(np.int8), first.fraction_bits)


def concat(tensors: Sequence[FxpTensor]) -> FxpTensor:
    _check_same_fraction(tensors)
    if len({t.values.shape[:2] for t in tensors}) != 1:
        raise FxpError("Concat inputs differ in spatial dims")
    return FxpTensor(np.concatenate([t.values for t in tensors], axis=2), tensors[0].fraction_bits)


def channel_split(tensor: FxpTensor, split: int, part: int) -> FxpTensor:
    if not 0 < split < tensor.shape.c:
        raise FxpError(f"split={split} out of range for {tensor.shape.c} channels")
    return slice_channels(tensor, 0, split) if part == 0 else slice_channels(tensor, split, tensor.shape.c)


def channel_shuffle(tensor: FxpTensor, groups: int) -> FxpTensor:
    h, w, c = tensor.values.shape
    if c % groups:
        raise FxpError(f"groups={groups} does not divide channels {c}")
    shuffled = tensor.values.reshape(h, w, groups, c // groups).transpose(0, 1, 3, 2).reshape(h, w, c)
    return FxpTensor(np.ascontiguousarray(shuffled), tensor.fraction_bits)
