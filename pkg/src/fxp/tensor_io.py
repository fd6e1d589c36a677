"""
Binary tensor and weight-store files. All integers little endian.

Tensor record:
    b"FXT1"              magic
    u32 ndim             3 for activations, 3 or 4 for kernels
    u32 dims[ndim]
    i32 fraction_bits
    i8  values[prod(dims)]   row-major

Weight store:
    b"FXW1"
    u32 count
    count x { u32 name_length, UTF-8 name, tensor record }
"""

import struct
from pathlib import Path
from typing import BinaryIO, Dict, Tuple

import numpy as np

from errors import FxpError
from .tensor import FxpKernel, FxpTensor

TENSOR_MAGIC = b"FXT1"
STORE_MAGIC = b"FXW1"


def _read_exact(stream: BinaryIO, size: int, what: str) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise FxpError(f"truncated file while reading {what}")
    return data


def _write_record(stream: BinaryIO, values: np.ndarray, fraction_bits: int):
    stream.write(TENSOR_MAGIC)
    stream.write(struct.pack("<I", values.ndim))
    stream.write(struct.pack(f"<{values.ndim}I", *values.shape))
    stream.write(struct.pack("<i", fraction_bits))
    stream.write(np.ascontiguousarray(values, dtype=np.int8).tobytes())


def _read_record(stream: BinaryIO) -> Tuple[np.ndarray, int]:
    if _read_exact(stream, 4, "magic") != TENSOR_MAGIC:
        raise FxpError("not a tensor record (bad magic)")
    (ndim,) = struct.unpack("<I", _read_exact(stream, 4, "ndim"))
    if not 1 <= ndim <= 4:
        raise FxpError(f"unsupported ndim {ndim}")
    dims = struct.unpack(f"<{ndim}I", _read_exact(stream, 4 * ndim, "dims"))
    if 0 in dims:
        raise FxpError(f"zero-sized dimension in {dims}", field="dims")
    (fraction_bits,) = struct.unpack("<i", _read_exact(stream, 4, "fraction_bits"))
    count = int(np.prod(dims))
    values = np.frombuffer(_read_exact(stream, count, "values"), dtype=np.int8).reshape(dims)
    return values, fraction_bits


def save_tensor(path, tensor: FxpTensor):
    with open(path, "wb") as f:
        _write_record(f, tensor.values, tensor.fraction_bits)


def load_tensor(path) -> FxpTensor:
    try:
        with open(path, "rb") as f:
            values, fraction_bits = _read_record(f)
            if f.read(1):
                raise FxpError("trailing bytes after tensor record")
        return FxpTensor(values, fraction_bits)
    except FxpError as e:
        raise e.with_source(str(Path(path)))


def save_weight_store(path, store: Dict[str, FxpKernel]):
    with open(path, "wb") as f:
        f.write(STORE_MAGIC)
        f.write(struct.pack("<I", len(store)))
        for name, kernel in store.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            _write_record(f, kernel.values, kernel.fraction_bits)


def load_weight_store(path) -> Dict[str, FxpKernel]:
    try:
        with open(path, "rb") as f:
            if _read_exact(f, 4, "magic") != STORE_MAGIC:
                raise FxpError("not a weight store (bad magic)")
            (count,) = struct.unpack("<I", _read_exact(f, 4, "count"))
            store = {}
            for _ in range(count):
                (length,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
                try:
                    name = _read_exact(f, length, "name").decode("utf-8")
                except UnicodeDecodeError:
                    raise FxpError(f"entry {len(store)} name is not UTF-8", field="name") from None
                if name in store:
                    raise FxpError(f"duplicate entry '{name}'", field=name)
                values, fraction_bits = _read_record(f)
                store[name] = FxpKernel(values, fraction_bits)
            if f.read(1):
                raise FxpError("trailing bytes after weight store")
        return store
    except FxpError as e:
        raise e.with_source(str(Path(path)))
