import itertools
import struct

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from errors import FxpError
from fxp import (FxpKernel, FxpTensor, LineBuffer, add, avg_pool2d, channel_shuffle, channel_split,
                 channel_split_conv, combine_partials, concat, conv2d, depthwise_conv2d, grouped_conv2d, max_pool2d,
                 quantize, quantize_kernel, requantize, stream_conv2d, stream_depthwise_conv2d)
from fxp.executor import first_mismatch
from fxp.kernels import conv_accumulate
from fxp.tensor_io import load_tensor, load_weight_store, save_tensor, save_weight_store
from graph_ops import padding_for, spatial_out, weight_dims
from model import LayerSpec, TensorShape


def rand_tensor(rng, h, w, c, f=6):
    return FxpTensor(rng.integers(-128, 128, size=(h, w, c), dtype=np.int8), f)


def rand_kernel(rng, dims, f=6):
    return FxpKernel(rng.integers(-128, 128, size=dims, dtype=np.int8), f)


def naive_conv_acc(x: FxpTensor, k: FxpKernel, spec: LayerSpec) -> np.ndarray:
    """Direct loop over outputs and taps, reading zero outside the padded input."""
    (top, _), (left, _) = padding_for(spec, x.shape)
    h_o, w_o = spatial_out(spec, x.shape)
    c_group = x.shape.c // spec.groups
    n_group = spec.n // spec.groups
    values = x.values.astype(np.int64)
    weights = k.values.astype(np.int64)
    out = np.zeros((h_o, w_o, spec.n), dtype=np.int64)
    for oy, ox, o in itertools.product(range(h_o), range(w_o), range(spec.n)):
        g = o // n_group
        total = 0
        for ky, kx, ci in itertools.product(range(spec.k_h), range(spec.k_w), range(c_group)):
            iy, ix = oy * spec.stride + ky - top, ox * spec.stride + kx - left
            if 0 <= iy < x.shape.h and 0 <= ix < x.shape.w:
                total += values[iy, ix, g * c_group + ci] * weights[ky, kx, ci, o]
        out[oy, ox, o] = total
    return out.astype(np.int32)


def test_quantize_rounds_half_away_from_zero_and_saturates():
    t = quantize([0.5 / 64, -0.5 / 64, 1.5 / 64, 10.0, -10.0, 0.0], TensorShape(1, 1, 6), fraction_bits=6)
    assert t.values.reshape(-1).tolist() == [1, -1, 2, 127, -128, 0]


def test_quantize_rejects_bad_inputs():
    with pytest.raises(FxpError):
        quantize([1.0, 2.0], TensorShape(1, 1, 3))
    with pytest.raises(FxpError):
        quantize([float("nan")], TensorShape(1, 1, 1))
    with pytest.raises(FxpError):
        quantize([1.0], TensorShape(1, 1, 1), fraction_bits=8)


def test_requantize_is_arithmetic_shift_then_clip():
    acc = np.array([64, 65, -1, -65, 127 * 64 + 63, 1 << 20, -(1 << 20)], dtype=np.int32)
    assert requantize(acc, 6).tolist() == [1, 1, -1, -2, 127, 127, -128]


def test_tensor_values_are_read_only():
    t = rand_tensor(np.random.default_rng(0), 2, 2, 2)
    with pytest.raises(ValueError):
        t.values[0, 0, 0] = 1


def test_conv_matches_direct_loop():
    rng = np.random.default_rng(1)
    for k, stride, padding, groups in itertools.product((1, 3), (1, 2), ("same", "valid"), (1, 2)):
        x = rand_tensor(rng, 5, 6, 4)
        spec = LayerSpec.conv(k, 4, stride=stride, padding=padding, groups=groups)
        kernel = rand_kernel(rng, weight_dims(spec, x.shape))
        assert np.array_equal(conv_accumulate(x, kernel, spec), naive_conv_acc(x, kernel, spec))


def test_grouped_conv_equals_per_group_concatenation():
    rng = np.random.default_rng(2)
    x = rand_tensor(rng, 6, 6, 6)
    spec = LayerSpec.conv(3, 6, groups=3)
    kernel = rand_kernel(rng, weight_dims(spec, x.shape))
    assert grouped_conv2d(x, kernel, spec) == conv2d(x, kernel, spec)


def test_split_sum_is_exact_for_every_g():
    rng = np.random.default_rng(3)
    for c, k in itertools.product(range(2, 7), (1, 3, 5)):
        x = rand_tensor(rng, 6, 6, c)
        spec = LayerSpec.conv(k, 3)
        kernel = rand_kernel(rng, weight_dims(spec, x.shape))
        reference = conv2d(x, kernel, spec)
        for g in range(1, c):
            assert combine_partials(channel_split_conv(x, kernel, spec, g)) == reference, (c, k, g)


def test_split_rejects_out_of_range_g():
    rng = np.random.default_rng(4)
    x = rand_tensor(rng, 4, 4, 4)
    spec = LayerSpec.conv(3, 2)
    kernel = rand_kernel(rng, weight_dims(spec, x.shape))
    for g in (0, 4):
        with pytest.raises(FxpError):
            channel_split_conv(x, kernel, spec, g)


def test_requantizing_partials_separately_can_differ():
    # each half alone shifts to 0, their sum to 1
    f = 6
    a = np.full((1, 1, 1), 33, dtype=np.int32)
    b = np.full((1, 1, 1), 31, dtype=np.int32)
    separately = int(requantize(a, f)[0, 0, 0]) + int(requantize(b, f)[0, 0, 0])
    together = int(requantize(a + b, f)[0, 0, 0])
    assert (separately, together) == (0, 1)


@given(h=st.integers(1, 7), w=st.integers(1, 7), c=st.integers(1, 5), n=st.integers(1, 4),
       k=st.sampled_from([1, 3, 5]), stride=st.integers(1, 3), padding=st.sampled_from(["same", "valid"]),
       seed=st.integers(0, 2 ** 16))
def test_streamed_conv_matches_reference(h, w, c, n, k, stride, padding, seed):
    assume(padding == "same" or k <= min(h, w))
    rng = np.random.default_rng(seed)
    x = rand_tensor(rng, h, w, c)
    spec = LayerSpec.conv(k, n, stride=stride, padding=padding)
    kernel = rand_kernel(rng, weight_dims(spec, x.shape))
    assert stream_conv2d(x, kernel, spec) == conv2d(x, kernel, spec)


@given(h=st.integers(1, 7), w=st.integers(1, 7), c=st.integers(1, 5), k=st.sampled_from([1, 3, 5]),
       stride=st.integers(1, 2), seed=st.integers(0, 2 ** 16))
def test_streamed_depthwise_matches_reference(h, w, c, k, stride, seed):
    rng = np.random.default_rng(seed)
    x = rand_tensor(rng, h, w, c)
    spec = LayerSpec.depthwise(k, stride=stride)
    kernel = rand_kernel(rng, weight_dims(spec, x.shape))
    assert stream_depthwise_conv2d(x, kernel, spec) == depthwise_conv2d(x, kernel, spec)


def test_line_buffer_emits_one_window_per_output_row():
    spec = LayerSpec.conv(3, 1, stride=2)
    buffer = LineBuffer(spec, TensorShape(7, 5, 2))
    windows = []
    for _ in range(7):
        windows.extend(buffer.push(np.zeros((5, 2), dtype=np.int64)))
    windows.extend(buffer.flush())
    assert len(windows) == 4
    assert all(wnd.shape == (3, 7, 2) for wnd in windows)
    assert buffer.capacity_bytes == 2 * 5 * 2


def test_max_pool_ignores_padding():
    x = FxpTensor(np.full((2, 2, 1), -100, dtype=np.int8))
    out = max_pool2d(x, LayerSpec.max_pool(3))
    assert out.values.reshape(-1).tolist() == [-100] * 4


def test_avg_pool_floor_divides_zero_padded_sum():
    x = FxpTensor(np.array([[[9], [1]], [[-5], [0]]], dtype=np.int8))
    out = avg_pool2d(x, LayerSpec.avg_pool(2, stride=2))
    assert out.values.reshape(-1).tolist() == [(9 + 1 - 5 + 0) // 4]
    out = avg_pool2d(x, LayerSpec.avg_pool(3))
    assert int(out.values[0, 0, 0]) == 5 // 9
    assert int(out.values[1, 1, 0]) == 5 // 9


def test_add_saturates_once():
    a = FxpTensor(np.array([[[100, -100, 100]]], dtype=np.int8))
    b = FxpTensor(np.array([[[100, -100, -50]]], dtype=np.int8))
    c = FxpTensor(np.array([[[-100, 0, 0]]], dtype=np.int8))
    assert add([a, b, c]).values.reshape(-1).tolist() == [100, -128, 50]


def test_data_movement_kernels():
    x = FxpTensor(np.arange(6, dtype=np.int8).reshape(1, 1, 6))
    assert channel_split(x, 2, 0).values.reshape(-1).tolist() == [0, 1]
    assert channel_split(x, 2, 1).values.reshape(-1).tolist() == [2, 3, 4, 5]
    assert channel_shuffle(x, 2).values.reshape(-1).tolist() == [0, 3, 1, 4, 2, 5]
    assert concat([channel_split(x, 2, 1), channel_split(x, 2, 0)]).values.reshape(-1).tolist() == [2, 3, 4, 5, 0, 1]


def test_mismatched_fraction_bits_are_rejected():
    rng = np.random.default_rng(5)
    x = rand_tensor(rng, 3, 3, 2, f=5)
    spec = LayerSpec.conv(3, 2)
    with pytest.raises(FxpError):
        conv2d(x, rand_kernel(rng, weight_dims(spec, x.shape), f=6), spec)
    with pytest.raises(FxpError):
        add([x, rand_tensor(rng, 3, 3, 2, f=6)])


def test_tensor_files(tmp_path):
    rng = np.random.default_rng(6)
    x = rand_tensor(rng, 3, 4, 5)
    save_tensor(tmp_path / "x.fxt", x)
    assert load_tensor(tmp_path / "x.fxt") == x

    store = {"a": rand_kernel(rng, (3, 3, 5, 2)), "dw": rand_kernel(rng, (3, 3, 4))}
    save_weight_store(tmp_path / "w.fxw", store)
    loaded = load_weight_store(tmp_path / "w.fxw")
    assert list(loaded) == ["a", "dw"]
    assert all(loaded[name] == store[name] for name in store)


def test_truncated_tensor_file_names_the_path(tmp_path):
    rng = np.random.default_rng(7)
    path = tmp_path / "x.fxt"
    save_tensor(path, rand_tensor(rng, 2, 2, 2))
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(FxpError) as info:
        load_tensor(path)
    assert info.value.source == str(path)
    assert "truncated" in info.value.message


def test_quantize_kernel_dims():
    kernel = quantize_kernel(np.zeros(18), (3, 3, 2))
    assert kernel.dims == (3, 3, 2)


def test_first_mismatch_reports_the_earliest_layer_and_element():
    rng = np.random.default_rng(3)
    a, b = rand_tensor(rng, 2, 3, 4), rand_tensor(rng, 2, 3, 4)
    changed = b.values.copy()
    changed[1, 2, 3] = changed[1, 2, 3] ^ 1
    expected = {"x": a, "y": b}
    actual = {"x": a, "y": FxpTensor(changed, b.fraction_bits)}
    assert first_mismatch(expected, expected, ["x", "y"]) is None
    mismatch = first_mismatch(expected, actual, ["x", "y"])
    assert mismatch == ("y", (1, 2, 3), int(b.values[1, 2, 3]), int(changed[1, 2, 3]))


@given(h=st.integers(1, 6), w=st.integers(1, 6), c=st.integers(1, 5), k=st.sampled_from([1, 3, 5]),
       stride=st.integers(1, 2), seed=st.integers(0, 2 ** 16))
def test_fully_grouped_conv_is_depthwise(h, w, c, k, stride, seed):
    rng = np.random.default_rng(seed)
    x = rand_tensor(rng, h, w, c)
    grouped = LayerSpec.conv(k, c, stride=stride, groups=c)
    kernel = rand_kernel(rng, (k, k, 1, c))
    depthwise = FxpKernel(kernel.values.reshape(k, k, c), kernel.fraction_bits)
    assert grouped_conv2d(x, kernel, grouped) == depthwise_conv2d(x, depthwise, LayerSpec.depthwise(k, stride=stride))


reals = st.floats(-300.0, 300.0, allow_nan=False)


@given(a=reals, b=reals, f=st.integers(0, 7))
def test_quantize_is_monotone_and_saturating(a, b, f):
    lo, hi = sorted((a, b))
    q = quantize([lo, hi], TensorShape(1, 1, 2), fraction_bits=f).values.reshape(-1).tolist()
    assert -128 <= q[0] <= q[1] <= 127
    scale = 1 << f
    for x, v in zip((lo, hi), q):
        if x * scale >= 127.5:
            assert v == 127
        if x * scale <= -128.5:
            assert v == -128


@given(x=reals, f=st.integers(0, 7))
def test_quantize_error_is_at_most_half_a_step(x, f):
    assume(-128 <= x * (1 << f) <= 127)
    t = quantize([x], TensorShape(1, 1, 1), fraction_bits=f)
    assert abs(float(t.to_real()[0, 0, 0]) - x) <= 0.5 / (1 << f) + 1e-12


def _record(dims, fraction_bits=6):
    body = b"FXT1" + struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}I", *dims)
    return body + struct.pack("<i", fraction_bits) + bytes(int(np.prod(dims)))


@pytest.mark.parametrize("payload, field", [
    (b"FXW1" + struct.pack("<I", 1) + struct.pack("<I", 1) + b"\xff" + _record((1, 1, 1)), "name"),
    (b"FXW1" + struct.pack("<I", 1) + struct.pack("<I", 1) + b"a" + _record((3, 0, 2)), "dims"),
])
def test_corrupt_weight_store_names_the_path(payload, field, tmp_path):
    path = tmp_path / "w.fxw"
    path.write_bytes(payload)
    with pytest.raises(FxpError) as info:
        load_weight_store(path)
    assert (info.value.source, info.value.field) == (str(path), field)


def test_zero_sized_tensor_file_is_rejected(tmp_path):
    path = tmp_path / "x.fxt"
    path.write_bytes(_record((0, 2, 2)))
    with pytest.raises(FxpError) as info:
        load_tensor(path)
    assert info.value.source == str(path)
    assert "zero-sized" in info.value.message
