"""Bit-exact int8 functional reference.

`conv_oracle` evaluates a layer in the naive reference order and is the
ground truth for `conv_blocked`, which walks the accelerator's blocked loop
schedule; both return identical 32-bit accumulator tensors because integer
accumulation is exact in any order.  `run_network` executes whole sequential
networks in either order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ..netir import LayerKind, LayerSpec, NetworkSpec, infer_shapes, output_spatial
from ..perfmodel import HardwareConfig
from . import _backend
from .quant import INT8_MIN, QuantTensor, QuantWeights, relu_quantize


def _check_conv_args(inp: QuantTensor, weights: QuantWeights, layer: LayerSpec) -> None:
    if not layer.is_conv:
        raise ValueError(f"{layer.describe()}: not a convolution layer")
    if inp.shape.c != layer.ic:
        raise ValueError(f"{layer.describe()}: input has {inp.shape.c} channels, layer wants {layer.ic}")
    if not weights.matches(layer):
        raise ValueError(f"{layer.describe()}: weight tensor {weights.data.shape} does not match")


def _out_array(inp: QuantTensor, layer: LayerSpec) -> np.ndarray:
    oh, ow = output_spatial(layer, inp.shape.h, inp.shape.w)
    return np.zeros((layer.oc, oh, ow), dtype=np.int32)


def conv_oracle(inp: QuantTensor, weights: QuantWeights, layer: LayerSpec) -> np.ndarray:
    """Naive-order convolution; exact int32 accumulators, no saturation."""
    _check_conv_args(inp, weights, layer)
    out = _out_array(inp, layer)
    x = inp.data.astype(np.int32)
    w = weights.data.astype(np.int32)
    step = layer.dilation + 1
    if layer.kind is LayerKind.DEPTHWISE:
        _backend.kernels.conv_depthwise_naive(x, w, layer.pad[0], layer.pad[2],
                                              layer.stride, step, out)
    else:
        _backend.kernels.conv_regular_naive(x, w, layer.pad[0], layer.pad[2],
                                            layer.stride, step, out)
    return out


def conv_blocked(inp: QuantTensor, weights: QuantWeights, layer: LayerSpec,
                 hw: HardwareConfig) -> np.ndarray:
    """Blocked-schedule convolution; bit-identical to conv_oracle."""
    _check_conv_args(inp, weights, layer)
    out = _out_array(inp, layer)
    x = inp.data.astype(np.int32)
    w = weights.data.astype(np.int32)
    step = layer.dilation + 1
    if layer.kind is LayerKind.DEPTHWISE:
        _backend.kernels.conv_depthwise_blocked(x, w, layer.pad[0], layer.pad[2],
                                                layer.stride, step, hw.pe_num,
                                                hw.out_block_h, hw.out_block_w, out)
    else:
        _backend.kernels.conv_regular_blocked(x, w, layer.pad[0], layer.pad[2],
                                              layer.stride, step, hw.pe_num,
                                              hw.out_block_h, hw.out_block_w, out)
    return out


def max_pool(inp: QuantTensor, layer: LayerSpec) -> QuantTensor:
    """Max pooling; padded positions contribute the int8 minimum."""
    if layer.kind is not LayerKind.POOL:
        raise ValueError(f"{layer.describe()}: not a pooling layer")
    if inp.shape.c != layer.ic:
        raise ValueError(f"{layer.describe()}: channel mismatch")
    oh, ow = output_spatial(layer, inp.shape.h, inp.shape.w)
    pt, _, pl, _ = layer.pad
    c, ih, iw = inp.data.shape
    need_h = (oh - 1) * layer.stride + layer.ky
    need_w = (ow - 1) * layer.stride + layer.kx
    padded = np.full((c, max(need_h, pt + ih), max(need_w, pl + iw)), INT8_MIN, dtype=np.int8)
    padded[:, pt:pt + ih, pl:pl + iw] = inp.data
    out = np.full((c, oh, ow), INT8_MIN, dtype=np.int8)
    s = layer.stride
    for ky in range(layer.ky):
        for kx in range(layer.kx):
            sl = padded[:, ky:ky + (oh - 1) * s + 1:s, kx:kx + (ow - 1) * s + 1:s]
            np.maximum(out, sl, out=out)
    return QuantTensor.from_array(out, inp.scale_exponent)


Order = Literal["oracle", "blocked"]


@dataclass
class _Pending:
    acc: np.ndarray
    exponent: int


def run_network(inp: QuantTensor, net: NetworkSpec, weights: Sequence[QuantWeights],
                hw: HardwareConfig | None = None, order: Order = "oracle",
                act_shifts: Sequence[int] | None = None) -> QuantTensor:
    """Execute a network layer by layer.

    `weights` aligns with the network's convolution layers in order, and
    `act_shifts` (scale-exponent deltas, right shifts when positive) with its
    activation layers.  A convolution that is not followed by an activation is
    requantized with shift 0 (saturating cast) so both orders stay defined.
    """
    if order not in ("oracle", "blocked"):
        raise ValueError(f"order must be 'oracle' or 'blocked', got {order!r}")
    if order == "blocked" and hw is None:
        raise ValueError("blocked order needs a HardwareConfig")
    infer_shapes(net)  # validate against the declared input
    if net.input_shape != inp.shape:
        raise ValueError(f"input tensor {inp.shape} does not match network input {net.input_shape}")

    conv_layers = [i for i, l in enumerate(net.layers) if l.is_conv]
    if len(weights) != len(conv_layers):
        raise ValueError(f"network has {len(conv_layers)} conv layers, got {len(weights)} weight sets")
    act_layers = [i for i, l in enumerate(net.layers) if l.kind is LayerKind.ACTIVATION]
    shifts = list(act_shifts) if act_shifts is not None else [0] * len(act_layers)
    if len(shifts) != len(act_layers):
        raise ValueError(f"network has {len(act_layers)} activation layers, got {len(shifts)} shifts")

    cur = inp
    pending: _Pending | None = None
    wi = ai = 0

    def settle(p: _Pending) -> QuantTensor:
        data = relu_quantize(p.acc, 0, relu=False)
        return QuantTensor.from_array(data, p.exponent)

    for idx, layer in enumerate(net.layers):
        if layer.is_conv:
            if pending is not None:
                cur = settle(pending)
            w = weights[wi]
            if w is None:
                raise ValueError(f"{layer.describe(idx)}: missing weights")
            wi += 1
            if order == "oracle":
                acc = conv_oracle(cur, w, layer)
            else:
                acc = conv_blocked(cur, w, layer, hw)  # type: ignore[arg-type]
            pending = _Pending(acc, cur.scale_exponent + w.scale_exponent)
        elif layer.kind is LayerKind.ACTIVATION:
            shift = shifts[ai]
            ai += 1
            if pending is not None:
                acc, exp = pending.acc, pending.exponent
                pending = None
            else:
                acc, exp = cur.data.astype(np.int32), cur.scale_exponent
            data = relu_quantize(acc, shift, relu=(layer.act == "relu"))
            cur = QuantTensor.from_array(data, exp + shift)
        else:  # pooling
            if pending is not None:
                cur = settle(pending)
                pending = None
            cur = max_pool(cur, layer)
    if pending is not None:
        cur = settle(pending)
    return cur
