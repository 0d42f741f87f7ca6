"""Quantized tensors and the flat binary tensor container.

Values are signed 8-bit integers with a shared power-of-two scale:
real value = int * 2**scale_exponent.  Accumulators are 32-bit signed and
never saturate during accumulation; requantization rounds half away from
zero and saturates to [-128, 127].

Container layout: 16-byte header (magic b"QT8\\0", u32-LE c, h, w), one
signed byte per element in channels-first order, then one trailing signed
byte holding the scale exponent.  Weight files reuse the container with the
4-d layout recorded in a sidecar text descriptor.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..netir import LayerKind, LayerSpec, TensorShape

MAGIC = b"QT8\x00"
INT8_MIN, INT8_MAX = -128, 127


@dataclass(frozen=True)
class QuantTensor:
    shape: TensorShape
    data: np.ndarray  # int8, (c, h, w)
    scale_exponent: int = 0

    def __post_init__(self) -> None:
        if self.data.dtype != np.int8:
            raise ValueError(f"tensor data must be int8, got {self.data.dtype}")
        expected = (self.shape.c, self.shape.h, self.shape.w)
        if self.data.shape != expected:
            raise ValueError(f"data shape {self.data.shape} != declared {expected}")
        if not -128 <= self.scale_exponent <= 127:
            raise ValueError("scale exponent must fit a signed byte")

    @classmethod
    def from_array(cls, array: np.ndarray, scale_exponent: int = 0) -> "QuantTensor":
        arr = np.asarray(array, dtype=np.int8)
        c, h, w = arr.shape
        return cls(TensorShape(c, h, w), arr, scale_exponent)


@dataclass(frozen=True)
class QuantWeights:
    """Filter weights: regular layout (oc, ic, ky, kx), depthwise (oc, ky, kx)."""

    kind: LayerKind
    data: np.ndarray  # int8
    scale_exponent: int = 0

    def __post_init__(self) -> None:
        if self.data.dtype != np.int8:
            raise ValueError(f"weight data must be int8, got {self.data.dtype}")
        if self.kind is LayerKind.DEPTHWISE:
            if self.data.ndim != 3:
                raise ValueError("depthwise weights must be (oc, ky, kx)")
        elif self.kind in (LayerKind.REGULAR, LayerKind.POINTWISE):
            if self.data.ndim != 4:
                raise ValueError("regular weights must be (oc, ic, ky, kx)")
        else:
            raise ValueError("weights belong to convolution layers only")
        if not -128 <= self.scale_exponent <= 127:
            raise ValueError("scale exponent must fit a signed byte")

    def matches(self, layer: LayerSpec) -> bool:
        if layer.kind is LayerKind.DEPTHWISE:
            return (self.kind is LayerKind.DEPTHWISE
                    and self.data.shape == (layer.oc, layer.ky, layer.kx))
        return (self.kind is not LayerKind.DEPTHWISE
                and self.data.shape == (layer.oc, layer.ic, layer.ky, layer.kx))


def relu_quantize(acc: np.ndarray, shift: int, *, relu: bool = True) -> np.ndarray:
    """Requantize a 32-bit accumulator tensor down to int8.

    `shift` is the scale-exponent difference (output exponent minus
    accumulator exponent): positive values divide by 2**shift rounding half
    away from zero, negative values multiply.  ReLU is applied before the
    shift, so post-ReLU outputs land in [0, 127].
    """
    a = np.asarray(acc, dtype=np.int64)
    if relu:
        a = np.maximum(a, 0)
    if shift > 0:
        half = np.int64(1) << (shift - 1)
        mag = (np.abs(a) + half) >> shift
        a = np.sign(a) * mag
    elif shift < 0:
        a = a << (-shift)
    return np.clip(a, INT8_MIN, INT8_MAX).astype(np.int8)


def relu_quantize_scalar(value: int, shift: int, *, relu: bool = True) -> int:
    """Plain-integer reference for a single accumulator value."""
    if relu and value < 0:
        value = 0
    if shift > 0:
        half = 1 << (shift - 1)
        mag = (abs(value) + half) >> shift
        value = mag if value >= 0 else -mag
    elif shift < 0:
        value = value << (-shift)
    return max(INT8_MIN, min(INT8_MAX, value))


# --------------------------------------------------------------------------
# Container I/O
# --------------------------------------------------------------------------

def write_tensor(path, tensor: QuantTensor) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", tensor.shape.c, tensor.shape.h, tensor.shape.w))
        fh.write(tensor.data.tobytes(order="C"))
        fh.write(struct.pack("b", tensor.scale_exponent))


def read_tensor(path) -> QuantTensor:
    raw = Path(path).read_bytes()
    if len(raw) < 17 or raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a QT8 tensor container")
    c, h, w = struct.unpack("<III", raw[4:16])
    n = c * h * w
    if len(raw) != 16 + n + 1:
        raise ValueError(f"{path}: container holds {len(raw) - 17} payload bytes, expected {n}")
    data = np.frombuffer(raw[16:16 + n], dtype=np.int8).reshape(c, h, w).copy()
    (exp,) = struct.unpack("b", raw[16 + n:])
    return QuantTensor(TensorShape(c, h, w), data, exp)


def _descriptor_path(path) -> Path:
    return Path(str(path) + ".desc")


def write_weights(path, weights: QuantWeights) -> None:
    """Weights stored in the tensor container, flattened to (oc[*ic], ky, kx),
    with the true layout recorded alongside."""
    if weights.kind is LayerKind.DEPTHWISE:
        oc, ky, kx = weights.data.shape
        flat = weights.data
        desc = f"layout depthwise oc={oc} ky={ky} kx={kx}\n"
    else:
        oc, ic, ky, kx = weights.data.shape
        flat = weights.data.reshape(oc * ic, ky, kx)
        desc = f"layout regular oc={oc} ic={ic} ky={ky} kx={kx}\n"
    write_tensor(path, QuantTensor.from_array(flat, weights.scale_exponent))
    _descriptor_path(path).write_text(desc, encoding="utf-8")


def read_weights(path) -> QuantWeights:
    tensor = read_tensor(path)
    desc = _descriptor_path(path).read_text(encoding="utf-8").split()
    if not desc or desc[0] != "layout":
        raise ValueError(f"{path}: missing or malformed weight descriptor")
    fields = dict(item.split("=") for item in desc[2:])
    kind = desc[1]
    if kind == "depthwise":
        data = tensor.data
        if data.shape != (int(fields["oc"]), int(fields["ky"]), int(fields["kx"])):
            raise ValueError(f"{path}: descriptor does not match container dims")
        return QuantWeights(LayerKind.DEPTHWISE, data, tensor.scale_exponent)
    if kind == "regular":
        oc, ic = int(fields["oc"]), int(fields["ic"])
        data = tensor.data.reshape(oc, ic, int(fields["ky"]), int(fields["kx"]))
        return QuantWeights(LayerKind.REGULAR, data, tensor.scale_exponent)
    raise ValueError(f"{path}: unknown weight layout {kind!r}")
