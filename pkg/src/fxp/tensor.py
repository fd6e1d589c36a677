"""
8-bit fixed-point tensors.

A stored value v with f fraction bits represents v / 2**f. Products of two such values
carry 2f fraction bits and are accumulated in 32-bit signed integers; requantization
shifts right by f (arithmetic, i.e. truncation toward -inf) and saturates to int8.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from errors import FxpError
from model import TensorShape

INT8_MIN = -128
INT8_MAX = 127
MAX_FRACTION_BITS = 7
DEFAULT_FRACTION_BITS = 6


def _check_fraction_bits(fraction_bits: int):
    if not isinstance(fraction_bits, (int, np.integer)) or not 0 <= fraction_bits <= MAX_FRACTION_BITS:
        raise FxpError(f"fraction_bits must be an integer in [0, {MAX_FRACTION_BITS}], got {fraction_bits!r}")


def _frozen_int8(values: np.ndarray) -> np.ndarray:
    if values.dtype != np.int8:
        raise FxpError(f"values must be int8, got {values.dtype}")
    values = np.array(values, dtype=np.int8, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class FxpTensor:
    """Activation tensor, values laid out row-major as (h, w, c)."""
    values: np.ndarray
    fraction_bits: int = DEFAULT_FRACTION_BITS

    def __post_init__(self):
        _check_fraction_bits(self.fraction_bits)
        if np.ndim(self.values) != 3:
            raise FxpError(f"activation tensors are (h, w, c), got {np.ndim(self.values)} dims")
        object.__setattr__(self, "values", _frozen_int8(np.asarray(self.values)))
        TensorShape(*self.values.shape)

    @property
    def shape(self) -> TensorShape:
        return TensorShape(*(int(d) for d in self.values.shape))

    def to_real(self) -> np.ndarray:
        return self.values.astype(np.float64) / (1 << self.fraction_bits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FxpTensor):
            return NotImplemented
        return (self.fraction_bits == other.fraction_bits
                and self.values.shape == other.values.shape
                and bool(np.array_equal(self.values, other.values)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FxpKernel:
    """Weights: (k_h, k_w, C_I/groups, N) for convolutions, (k, k, C) for depthwise."""
    values: np.ndarray
    fraction_bits: int = DEFAULT_FRACTION_BITS

    def __post_init__(self):
        _check_fraction_bits(self.fraction_bits)
        if np.ndim(self.values) not in (3, 4):
            raise FxpError(f"kernels have 3 or 4 dims, got {np.ndim(self.values)}")
        object.__setattr__(self, "values", _frozen_int8(np.asarray(self.values)))

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(int(d) for d in self.values.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FxpKernel):
            return NotImplemented
        return (self.fraction_bits == other.fraction_bits
                and self.values.shape == other.values.shape
                and bool(np.array_equal(self.values, other.values)))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PartialOfm:
    """Unrequantized 32-bit accumulators of one side of a channel split, (H_O, W_O, N)."""
    acc: np.ndarray
    fraction_bits: int

    def __post_init__(self):
        _check_fraction_bits(self.fraction_bits)
        acc = np.array(self.acc, dtype=np.int32, copy=True)
        acc.setflags(write=False)
        object.__setattr__(self, "acc", acc)


def _round_half_away(scaled: np.ndarray) -> np.ndarray:
    return np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)


def _quantize_array(real_values, fraction_bits: int) -> np.ndarray:
    _check_fraction_bits(fraction_bits)
    real = np.asarray(real_values, dtype=np.float64)
    if not np.all(np.isfinite(real)):
        raise FxpError("cannot quantize non-finite values")
    scaled = _round_half_away(real * (1 << fraction_bits))
    return np.clip(scaled, INT8_MIN, INT8_MAX).astype(np.int8)


def quantize(real_values, shape: TensorShape, fraction_bits: int = DEFAULT_FRACTION_BITS) -> FxpTensor:
    """Round half away from zero, then saturate into [-128, 127]."""
    flat = np.asarray(real_values, dtype=np.float64).reshape(-1)
    if flat.size != shape.byte_size:
        raise FxpError(f"{flat.size} values do not fill a {shape} tensor ({shape.byte_size} elements)")
    return FxpTensor(_quantize_array(flat, fraction_bits).reshape(shape.h, shape.w, shape.c), fraction_bits)


def quantize_kernel(real_values, dims: Sequence[int], fraction_bits: int = DEFAULT_FRACTION_BITS) -> FxpKernel:
    flat = np.asarray(real_values, dtype=np.float64).reshape(-1)
    expected = int(np.prod(dims))
    if flat.size != expected:
        raise FxpError(f"{flat.size} values do not fill kernel dims {tuple(dims)}")
    return FxpKernel(_quantize_array(flat, fraction_bits).reshape(tuple(dims)), fraction_bits)


def wrap_int32(acc: np.ndarray) -> np.ndarray:
    """Reduce wide integer sums modulo 2**32, as a 32-bit accumulator would."""
    return np.asarray(acc).astype(np.int64).astype(np.int32)


def requantize(acc: np.ndarray, fraction_bits: int) -> np.ndarray:
    """Arithmetic right shift by fraction_bits, then saturate to int8."""
    _check_fraction_bits(fraction_bits)
    shifted = wrap_int32(acc) >> fraction_bits
    return np.clip(shifted, INT8_MIN, INT8_MAX).astype(np.int8)
