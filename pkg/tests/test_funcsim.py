import numpy as np
import pytest

from ddcsim.funcsim import (
    QuantTensor,
    QuantWeights,
    active_backend,
    conv_blocked,
    conv_oracle,
    max_pool,
    read_tensor,
    read_weights,
    relu_quantize,
    relu_quantize_scalar,
    run_network,
    write_tensor,
    write_weights,
)
from ddcsim.funcsim import _numba_kernels, _numpy_kernels
from ddcsim.netir import (
    LayerKind,
    NetworkSpec,
    TensorShape,
    activation,
    conv,
    depthwise,
    pool,
    same_pad,
)
from ddcsim.perfmodel import PROFILES, HardwareConfig

from conftest import random_tensor, random_weights

HW = PROFILES["proposed"]


def ones_weights(oc, ic, k):
    return QuantWeights(LayerKind.REGULAR, np.ones((oc, ic, k, k), dtype=np.int8))


def test_all_ones_3x3_sums_taps():
    x = QuantTensor.from_array(np.ones((1, 3, 3), dtype=np.int8))
    out = conv_oracle(x, ones_weights(1, 1, 3), conv(1, 1, 3))
    assert out.shape == (1, 1, 1)
    assert out[0, 0, 0] == 9


def test_identity_kernel_same_padding(rng):
    x = random_tensor(rng, 3, 7, 7)
    w = np.zeros((3, 3, 3, 3), dtype=np.int8)
    for c in range(3):
        w[c, c, 1, 1] = 1
    out = conv_oracle(x, QuantWeights(LayerKind.REGULAR, w), same_pad(conv(3, 3, 3)))
    assert np.array_equal(out, x.data.astype(np.int32))


def test_dilated_ramp_hand_enumeration():
    # 5x5 ramp 0..24, all-ones 3x3 kernel with one gap between taps:
    # taps land on rows/cols {0,2,4}; their sum is 108
    ramp = np.arange(25, dtype=np.int8).reshape(1, 5, 5)
    x = QuantTensor.from_array(ramp)
    out = conv_oracle(x, ones_weights(1, 1, 3), conv(1, 1, 3, dilation=1))
    assert out.shape == (1, 1, 1)
    assert out[0, 0, 0] == 108


def test_conv_argument_validation(rng):
    x = random_tensor(rng, 4, 8, 8)
    w = random_weights(rng, conv(4, 8, 3))
    with pytest.raises(ValueError, match="channels"):
        conv_oracle(x, w, conv(8, 8, 3))
    with pytest.raises(ValueError, match="does not match"):
        conv_oracle(x, w, conv(4, 8, 5))
    with pytest.raises(ValueError, match="not a convolution"):
        conv_oracle(x, w, activation(4))


def test_relu_quantize_examples():
    assert relu_quantize(np.array([-5]), 0)[0] == 0
    assert relu_quantize(np.array([130]), 0)[0] == 127
    assert relu_quantize(np.array([37]), 2)[0] == 9          # 9.25 rounds down
    assert relu_quantize(np.array([38]), 2)[0] == 10         # 9.5 rounds away
    assert relu_quantize(np.array([-38]), 2, relu=False)[0] == -10
    assert relu_quantize(np.array([3]), -4, relu=False)[0] == 48
    assert relu_quantize(np.array([2_000_000_000]), 0, relu=False)[0] == 127


def test_relu_quantize_matches_scalar_reference(rng):
    acc = rng.integers(-(2**30), 2**30, size=4096).astype(np.int64)
    for shift in (0, 1, 3, 7, 15):
        for relu in (True, False):
            vec = relu_quantize(acc, shift, relu=relu)
            ref = [relu_quantize_scalar(int(v), shift, relu=relu) for v in acc]
            assert np.array_equal(vec, np.array(ref, dtype=np.int8))


def random_case(rnd, rng):
    kind = rnd.choice(("regular", "depthwise"))
    k = rnd.choice((1, 3, 5, 7))
    d = rnd.choice((0, 1, 2))
    stride = rnd.choice((1, 2))
    h, w = rnd.randrange(4, 17), rnd.randrange(4, 17)
    extent = k + (k - 1) * d
    pad = rnd.choice((0, 1, extent // 2))
    if extent > min(h, w) + 2 * pad:
        pad = extent  # guarantee the window fits
    if kind == "depthwise":
        c = rnd.randrange(1, 33)
        layer = depthwise(c, k, dilation=d, stride=stride, pad=pad)
    else:
        ic, oc = rnd.randrange(1, 33), rnd.randrange(1, 33)
        layer = conv(ic, oc, k, dilation=d, stride=stride, pad=pad)
    x = random_tensor(rng, layer.ic, h, w, lo=-128, hi=128)
    wts = random_weights(rng, layer, lo=-128, hi=128)
    return layer, x, wts


def test_blocked_equals_oracle_randomized(rng):
    import random

    rnd = random.Random(42)
    for _ in range(120):
        layer, x, wts = random_case(rnd, rng)
        hw = HardwareConfig(pe_num=rnd.choice((1, 4, 8)), mac_pe=64,
                            bw_fm=16, bw_w=16,
                            out_block_h=rnd.choice((3, 4, 8, 16)),
                            out_block_w=rnd.choice((3, 4, 8, 16)))
        a = conv_oracle(x, wts, layer)
        b = conv_blocked(x, wts, layer, hw)
        assert np.array_equal(a, b), layer


def test_blocked_specific_cases(rng):
    dw = same_pad(depthwise(16, 3))
    x = random_tensor(rng, 16, 12, 12, lo=-128, hi=128)
    w = random_weights(rng, dw, lo=-128, hi=128)
    assert np.array_equal(conv_oracle(x, w, dw), conv_blocked(x, w, dw, HW))

    # 4x4 blocks over an 8x8 output exercise block-edge halos
    reg = same_pad(conv(8, 16, 5))
    hw = HardwareConfig(pe_num=8, mac_pe=64, bw_fm=16, bw_w=16, out_block_h=4, out_block_w=4)
    x = random_tensor(rng, 8, 8, 8, lo=-128, hi=128)
    w = random_weights(rng, reg, lo=-128, hi=128)
    assert np.array_equal(conv_oracle(x, w, reg), conv_blocked(x, w, reg, hw))


def test_backends_agree(rng):
    import random

    rnd = random.Random(17)
    for _ in range(30):
        layer, x, wts = random_case(rnd, rng)
        xi = x.data.astype(np.int32)
        wi = wts.data.astype(np.int32)
        from ddcsim.netir import output_spatial
        oh, ow = output_spatial(layer, x.shape.h, x.shape.w)
        args = (xi, wi, layer.pad[0], layer.pad[2], layer.stride, layer.dilation + 1)
        out_a = np.zeros((layer.oc, oh, ow), dtype=np.int32)
        out_b = np.zeros_like(out_a)
        if layer.kind is LayerKind.DEPTHWISE:
            _numba_kernels.conv_depthwise_naive(*args, out_a)
            _numpy_kernels.conv_depthwise_naive(*args, out_b)
        else:
            _numba_kernels.conv_regular_naive(*args, out_a)
            _numpy_kernels.conv_regular_naive(*args, out_b)
        assert np.array_equal(out_a, out_b)
        out_c = np.zeros_like(out_a)
        out_d = np.zeros_like(out_a)
        blocked_args = args + (4, 4, 4)
        if layer.kind is LayerKind.DEPTHWISE:
            _numba_kernels.conv_depthwise_blocked(*blocked_args[:6], 4, 4, 4, out_c)
            _numpy_kernels.conv_depthwise_blocked(*blocked_args[:6], 4, 4, 4, out_d)
        else:
            _numba_kernels.conv_regular_blocked(*blocked_args[:6], 4, 4, 4, out_c)
            _numpy_kernels.conv_regular_blocked(*blocked_args[:6], 4, 4, 4, out_d)
        assert np.array_equal(out_c, out_d)


def test_backend_name_reported():
    assert active_backend() in ("numba", "numpy")


def test_accumulation_linearity(rng):
    layer = same_pad(conv(4, 8, 3))
    w = random_weights(rng, layer, lo=-128, hi=128)
    a = rng.integers(-64, 63, (4, 9, 9)).astype(np.int8)
    b = rng.integers(-64, 63, (4, 9, 9)).astype(np.int8)
    out_a = conv_oracle(QuantTensor.from_array(a), w, layer)
    out_b = conv_oracle(QuantTensor.from_array(b), w, layer)
    out_ab = conv_oracle(QuantTensor.from_array(a + b), w, layer)
    assert np.array_equal(out_ab, out_a + out_b)


def test_depthwise_is_diagonal_regular(rng):
    c = 6
    dw = same_pad(depthwise(c, 3))
    wd = random_weights(rng, dw, lo=-128, hi=128)
    diag = np.zeros((c, c, 3, 3), dtype=np.int8)
    for i in range(c):
        diag[i, i] = wd.data[i]
    reg = same_pad(conv(c, c, 3))
    x = random_tensor(rng, c, 10, 10, lo=-128, hi=128)
    out_dw = conv_oracle(x, wd, dw)
    out_reg = conv_oracle(x, QuantWeights(LayerKind.REGULAR, diag), reg)
    assert np.array_equal(out_dw, out_reg)


def test_dilation_equals_zero_inserted_kernel(rng):
    d = 2
    k = 3
    extent = k + (k - 1) * d
    dense = np.zeros((1, 1, extent, extent), dtype=np.int8)
    sparse = random_weights(rng, conv(1, 1, k), lo=-128, hi=128)
    dense[0, 0, ::d + 1, ::d + 1] = sparse.data[0, 0]
    x = random_tensor(rng, 1, 12, 12, lo=-128, hi=128)
    out_sparse = conv_oracle(x, sparse, conv(1, 1, k, dilation=d, pad=3))
    out_dense = conv_oracle(x, QuantWeights(LayerKind.REGULAR, dense),
                            conv(1, 1, extent, dilation=0, pad=3))
    assert np.array_equal(out_sparse, out_dense)


def test_max_pool(rng):
    x = random_tensor(rng, 2, 6, 6, lo=-128, hi=128)
    out = max_pool(x, pool(2, 2))
    assert out.shape == TensorShape(2, 3, 3)
    ref = x.data.reshape(2, 3, 2, 3, 2).max(axis=(2, 4))
    assert np.array_equal(out.data, ref)


def fig_block(c=16, out_c=32):
    return NetworkSpec("block", TensorShape(c, 12, 12),
                       (same_pad(depthwise(c, 3)), activation(c), conv(c, out_c, 1)))


def test_run_network_orders_agree(rng):
    net = fig_block()
    x = random_tensor(rng, 16, 12, 12)
    weights = [random_weights(rng, l) for l in net.layers if l.is_conv]
    out_o = run_network(x, net, weights, order="oracle", act_shifts=[6])
    out_b = run_network(x, net, weights, hw=HW, order="blocked", act_shifts=[6])
    assert np.array_equal(out_o.data, out_b.data)
    assert out_o.scale_exponent == out_b.scale_exponent


def test_run_network_empty_is_identity(rng):
    x = random_tensor(rng, 3, 5, 5)
    net = NetworkSpec("empty", TensorShape(3, 5, 5))
    out = run_network(x, net, [])
    assert np.array_equal(out.data, x.data)


def test_run_network_missing_weights(rng):
    net = fig_block()
    x = random_tensor(rng, 16, 12, 12)
    with pytest.raises(ValueError, match="2 conv layers"):
        run_network(x, net, [random_weights(rng, net.layers[0])])
    with pytest.raises(ValueError, match="missing weights"):
        run_network(x, net, [random_weights(rng, net.layers[0]), None])


def test_run_network_conv_chain_without_activations(rng):
    # implicit saturating requantization keeps both orders defined
    net = NetworkSpec("chain", TensorShape(4, 8, 8),
                      (same_pad(conv(4, 4, 3)), same_pad(conv(4, 4, 3)), pool(4, 2)))
    x = random_tensor(rng, 4, 8, 8)
    weights = [random_weights(rng, l) for l in net.layers if l.is_conv]
    a = run_network(x, net, weights, order="oracle")
    b = run_network(x, net, weights, hw=HW, order="blocked")
    assert np.array_equal(a.data, b.data)


def test_rewrite_changes_function_but_not_shape(rng):
    from ddcsim.costmodel import ddc_rewrite
    from ddcsim.netir import infer_shapes, receptive_field

    net = NetworkSpec("casc", TensorShape(8, 10, 10),
                      (same_pad(conv(8, 8, 3)), activation(8), same_pad(conv(8, 8, 3))))
    ddc = ddc_rewrite(net)
    assert infer_shapes(net)[-1] == infer_shapes(ddc)[-1]
    assert receptive_field(net) == receptive_field(ddc)
    x = random_tensor(rng, 8, 10, 10)
    out_a = run_network(x, net, [random_weights(rng, l) for l in net.layers if l.is_conv],
                        act_shifts=[5])
    out_b = run_network(x, ddc, [random_weights(rng, l) for l in ddc.layers if l.is_conv],
                        act_shifts=[5])
    assert out_a.shape == out_b.shape


def test_tensor_container_roundtrip(tmp_path, rng):
    t = random_tensor(rng, 3, 4, 5, exponent=-7)
    path = tmp_path / "x.qt8"
    write_tensor(path, t)
    raw = path.read_bytes()
    assert raw[:4] == b"QT8\x00"
    assert len(raw) == 16 + 3 * 4 * 5 + 1
    back = read_tensor(path)
    assert back.shape == t.shape
    assert back.scale_exponent == t.scale_exponent
    assert np.array_equal(back.data, t.data)


def test_weights_container_roundtrip(tmp_path, rng):
    for layer in (conv(3, 8, 5), depthwise(6, 3)):
        w = random_weights(rng, layer, exponent=-5)
        path = tmp_path / f"{layer.kind.value}.qt8"
        write_weights(path, w)
        assert (tmp_path / f"{layer.kind.value}.qt8.desc").exists()
        back = read_weights(path)
        assert back.kind == w.kind and back.scale_exponent == -5
        assert np.array_equal(back.data, w.data)


def test_container_rejects_garbage(tmp_path):
    path = tmp_path / "bad.qt8"
    path.write_bytes(b"nope")
    with pytest.raises(ValueError, match="not a QT8"):
        read_tensor(path)
    path.write_bytes(b"QT8\x00" + b"\x02\x00\x00\x00" * 3 + b"\x00" * 3)
    with pytest.raises(ValueError, match="payload"):
        read_tensor(path)


def test_quant_tensor_validation():
    with pytest.raises(ValueError, match="int8"):
        QuantTensor(TensorShape(1, 2, 2), np.zeros((1, 2, 2), dtype=np.int32))
    with pytest.raises(ValueError, match="declared"):
        QuantTensor(TensorShape(1, 2, 2), np.zeros((1, 2, 3), dtype=np.int8))
    with pytest.raises(ValueError, match="depthwise"):
        QuantWeights(LayerKind.DEPTHWISE, np.zeros((1, 2, 3, 3), dtype=np.int8))
