"""Network intermediate representation.

Sequential CNNs are described as an input tensor shape plus an ordered list
of layers (regular / depthwise / pointwise convolutions, activations, and
pooling).  This module owns the on-disk JSON description format, shape
inference, receptive-field composition, and validation.  Everything here is
immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence


class ParseError(ValueError):
    """Raised for malformed network description documents."""


class ValidationError(ValueError):
    """Raised when a structurally well-formed network violates an invariant."""


class LayerKind(enum.Enum):
    REGULAR = "regular"
    DEPTHWISE = "depthwise"
    POINTWISE = "pointwise"  # 1x1 regular conv; kept distinct for reporting only
    ACTIVATION = "activation"
    POOL = "pool"


CONV_KINDS = (LayerKind.REGULAR, LayerKind.DEPTHWISE, LayerKind.POINTWISE)

#: Per-side padding in pixels: (top, bottom, left, right).
Padding = tuple[int, int, int, int]


def effective_extent(kernel: int, dilation: int) -> int:
    """Span of a dilated kernel: `dilation` zero gaps between adjacent taps."""
    return kernel + (kernel - 1) * dilation


@dataclass(frozen=True)
class TensorShape:
    """Channels-first feature map shape."""

    c: int
    h: int
    w: int

    def __post_init__(self) -> None:
        if min(self.c, self.h, self.w) < 1:
            raise ValidationError(f"tensor shape must be >= 1 per axis, got {self}")

    @property
    def pixels(self) -> int:
        return self.h * self.w


@dataclass(frozen=True)
class LayerSpec:
    """One network layer.

    `pad` holds resolved per-side pixel counts; `pad_spec` keeps the form the
    layer was declared with (int, "same", or an explicit 4-tuple) so that
    serialization round-trips exactly.  For activation layers the kernel,
    stride, and dilation fields are unused and left at their defaults.
    """

    kind: LayerKind
    ic: int
    oc: int
    kx: int = 0
    ky: int = 0
    dilation: int = 0
    stride: int = 1
    pad: Padding = (0, 0, 0, 0)
    pad_spec: Any = 0
    act: str | None = None

    @property
    def is_conv(self) -> bool:
        return self.kind in CONV_KINDS

    @property
    def is_spatial(self) -> bool:
        """True for layers with a kernel window (conv and pool)."""
        return self.kind is not LayerKind.ACTIVATION

    @property
    def extent_x(self) -> int:
        return effective_extent(self.kx, self.dilation)

    @property
    def extent_y(self) -> int:
        return effective_extent(self.ky, self.dilation)

    def describe(self, index: int | None = None) -> str:
        pos = f"layer {index} " if index is not None else ""
        if self.kind is LayerKind.ACTIVATION:
            return f"{pos}({self.kind.value} {self.act})"
        return f"{pos}({self.kind.value} {self.kx}x{self.ky} {self.ic}->{self.oc})"


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_shape: TensorShape
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def conv_layers(self) -> list[tuple[int, LayerSpec]]:
        return [(i, l) for i, l in enumerate(self.layers) if l.is_conv]


def output_spatial(layer: LayerSpec, h: int, w: int) -> tuple[int, int]:
    """Output height/width of one spatial layer applied to an h-by-w map."""
    if layer.kind is LayerKind.ACTIVATION:
        return h, w
    pt, pb, pl, pr = layer.pad
    ph, pw = h + pt + pb, w + pl + pr
    ey, ex = layer.extent_y, layer.extent_x
    if ey > ph or ex > pw:
        raise ValidationError(
            f"{layer.describe()}: kernel extent {ey}x{ex} exceeds padded input {ph}x{pw}"
        )
    return (ph - ey) // layer.stride + 1, (pw - ex) // layer.stride + 1


def infer_shapes(net: NetworkSpec) -> tuple[TensorShape, ...]:
    """Shapes at every layer boundary: input shape first, then one per layer."""
    shapes = [net.input_shape]
    cur = net.input_shape
    for i, layer in enumerate(net.layers):
        if layer.ic != cur.c:
            raise ValidationError(
                f"{layer.describe(i)}: declared ic {layer.ic} does not match "
                f"incoming channel count {cur.c}"
            )
        try:
            oh, ow = output_spatial(layer, cur.h, cur.w)
        except ValidationError as exc:
            raise ValidationError(f"layer {i}: {exc}") from None
        cur = TensorShape(layer.oc, oh, ow)
        shapes.append(cur)
    return tuple(shapes)


def receptive_field(net: NetworkSpec) -> tuple[int, int]:
    """(rf_y, rf_x): input extent seen by one output value.

    Composes per-layer effective extents; pooling contributes through its
    window and stride exactly like a convolution.
    """
    rf_y = rf_x = 1
    jump_y = jump_x = 1
    for layer in net.layers:
        if layer.kind is LayerKind.ACTIVATION:
            continue
        rf_y += (layer.extent_y - 1) * jump_y
        rf_x += (layer.extent_x - 1) * jump_x
        jump_y *= layer.stride
        jump_x *= layer.stride
    return rf_y, rf_x


def validate_network(net: NetworkSpec, max_kernel: int | None = None) -> None:
    """Check every structural invariant; raises ValidationError on failure.

    `max_kernel` enforces a hardware ceiling on kernel taps per axis (the
    reference accelerator supports at most 7x7).
    """
    for i, layer in enumerate(net.layers):
        if layer.kind is LayerKind.ACTIVATION:
            if layer.act not in ("relu", "quantize"):
                raise ValidationError(f"{layer.describe(i)}: unknown activation payload")
            if layer.ic != layer.oc:
                raise ValidationError(f"{layer.describe(i)}: activation requires ic == oc")
            continue
        if layer.kx < 1 or layer.ky < 1:
            raise ValidationError(f"{layer.describe(i)}: kernel must be >= 1x1")
        if layer.stride < 1:
            raise ValidationError(f"{layer.describe(i)}: stride must be >= 1")
        if layer.dilation < 0:
            raise ValidationError(f"{layer.describe(i)}: dilation must be >= 0")
        if any(p < 0 for p in layer.pad):
            raise ValidationError(f"{layer.describe(i)}: negative padding")
        if layer.kind is LayerKind.DEPTHWISE and layer.ic != layer.oc:
            raise ValidationError(f"{layer.describe(i)}: depthwise requires IC == OC")
        if layer.kind is LayerKind.POOL and layer.ic != layer.oc:
            raise ValidationError(f"{layer.describe(i)}: pooling preserves channels")
        if max_kernel is not None and layer.is_conv and max(layer.kx, layer.ky) > max_kernel:
            raise ValidationError(
                f"{layer.describe(i)}: kernel exceeds the {max_kernel}x{max_kernel} hardware limit"
            )
    infer_shapes(net)  # raises on channel chaining / negative extents


# --------------------------------------------------------------------------
# JSON description format
#
# {"name": ..., "input_shape": {"c":, "h":, "w":},
#  "layers": [{"type": "conv"|"depthwise"|"activation"|"pool", ...}]}
#
# Layer keys: ic, oc, kx, ky, dilation, stride, pad (int | "same" | [t,b,l,r]),
# act ("relu"|"quantize", activation layers only).  Unknown keys are rejected.
# Defaults: stride 1, dilation 0, pad 0, ic inherited from the previous layer.
# A 1x1 dense "conv" is normalized to the pointwise kind but serializes back
# as "conv".
# --------------------------------------------------------------------------

_LAYER_KEYS = {
    "conv": {"type", "ic", "oc", "kx", "ky", "dilation", "stride", "pad"},
    "depthwise": {"type", "ic", "oc", "kx", "ky", "dilation", "stride", "pad"},
    "activation": {"type", "ic", "oc", "act"},
    "pool": {"type", "ic", "oc", "kx", "ky", "stride", "pad"},
}


def _require_count(obj: dict, key: str, where: str, minimum: int = 1) -> int:
    value = obj.get(key)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ParseError(f"{where}: '{key}' must be an integer >= {minimum}, got {value!r}")
    return value


def _same_padding(in_size: int, extent: int, stride: int) -> tuple[int, int]:
    """TF-style SAME: output = ceil(in / stride); front side gets the smaller half."""
    out = -(-in_size // stride)
    total = max((out - 1) * stride + extent - in_size, 0)
    front = total // 2
    return front, total - front


def _resolve_pad(spec: Any, extent_y: int, extent_x: int, h: int, w: int,
                 stride: int, where: str) -> tuple[Padding, Any]:
    if spec == "same":
        pt, pb = _same_padding(h, extent_y, stride)
        pl, pr = _same_padding(w, extent_x, stride)
        return (pt, pb, pl, pr), "same"
    if isinstance(spec, int) and not isinstance(spec, bool):
        if spec < 0:
            raise ParseError(f"{where}: negative pad")
        return (spec, spec, spec, spec), spec
    if isinstance(spec, (list, tuple)) and len(spec) == 4 and all(
        isinstance(p, int) and not isinstance(p, bool) and p >= 0 for p in spec
    ):
        quad = tuple(int(p) for p in spec)
        return quad, quad  # type: ignore[return-value]
    raise ParseError(f"{where}: 'pad' must be an int, \"same\", or [top,bottom,left,right]")


def _parse_layer(obj: dict, index: int, cur: TensorShape) -> LayerSpec:
    where = f"layer {index}"
    if not isinstance(obj, dict):
        raise ParseError(f"{where}: expected an object")
    ltype = obj.get("type")
    if ltype not in _LAYER_KEYS:
        raise ParseError(f"{where}: 'type' must be one of {sorted(_LAYER_KEYS)}, got {ltype!r}")
    unknown = set(obj) - _LAYER_KEYS[ltype]
    if unknown:
        raise ParseError(f"{where} ({ltype}): unknown keys {sorted(unknown)}")

    ic = _require_count(obj, "ic", where) if "ic" in obj else cur.c

    if ltype == "activation":
        act = obj.get("act")
        if act not in ("relu", "quantize"):
            raise ParseError(f"{where}: activation needs 'act' of \"relu\" or \"quantize\"")
        oc = _require_count(obj, "oc", where) if "oc" in obj else ic
        return LayerSpec(LayerKind.ACTIVATION, ic=ic, oc=oc, act=act)

    stride = _require_count(obj, "stride", where) if "stride" in obj else 0
    if ltype == "pool":
        kx = _require_count(obj, "kx", where) if "kx" in obj else stride
        if kx == 0:
            raise ParseError(f"{where}: pool needs 'kx' or 'stride'")
        ky = _require_count(obj, "ky", where) if "ky" in obj else kx
        stride = stride or kx
        dilation = 0
        oc = _require_count(obj, "oc", where) if "oc" in obj else ic
        kind = LayerKind.POOL
    else:
        if "kx" not in obj:
            raise ParseError(f"{where}: convolution needs 'kx'")
        kx = _require_count(obj, "kx", where)
        ky = _require_count(obj, "ky", where) if "ky" in obj else kx
        stride = stride or 1
        dilation = obj.get("dilation", 0)
        if not isinstance(dilation, int) or isinstance(dilation, bool) or dilation < 0:
            raise ParseError(f"{where}: 'dilation' must be an integer >= 0")
        if ltype == "depthwise":
            oc = _require_count(obj, "oc", where) if "oc" in obj else ic
            kind = LayerKind.DEPTHWISE
        else:
            oc = _require_count(obj, "oc", where)
            if kx == ky == 1:
                dilation = 0  # no gaps to insert in a single tap
                kind = LayerKind.POINTWISE
            else:
                kind = LayerKind.REGULAR

    ey, ex = effective_extent(ky, dilation), effective_extent(kx, dilation)
    pad, pad_spec = _resolve_pad(obj.get("pad", 0), ey, ex, cur.h, cur.w, stride, where)
    return LayerSpec(kind, ic=ic, oc=oc, kx=kx, ky=ky, dilation=dilation,
                     stride=stride, pad=pad, pad_spec=pad_spec)


def network_from_dict(doc: dict) -> NetworkSpec:
    if not isinstance(doc, dict):
        raise ParseError("document root must be an object")
    unknown = set(doc) - {"name", "input_shape", "layers"}
    if unknown:
        raise ParseError(f"unknown top-level keys {sorted(unknown)}")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise ParseError("'name' must be a string")
    ishape = doc.get("input_shape")
    if not isinstance(ishape, dict) or set(ishape) != {"c", "h", "w"}:
        raise ParseError("'input_shape' must be an object with keys c, h, w")
    try:
        input_shape = TensorShape(
            _require_count(ishape, "c", "input_shape"),
            _require_count(ishape, "h", "input_shape"),
            _require_count(ishape, "w", "input_shape"),
        )
    except ValidationError as exc:
        raise ParseError(str(exc)) from None

    raw_layers = doc.get("layers", [])
    if not isinstance(raw_layers, list):
        raise ParseError("'layers' must be an array")

    layers: list[LayerSpec] = []
    cur = input_shape
    for i, obj in enumerate(raw_layers):
        layer = _parse_layer(obj, i, cur)
        layers.append(layer)
        partial = NetworkSpec(name, input_shape, tuple(layers))
        shapes = infer_shapes(partial)  # validates chaining + extents as we go
        cur = shapes[-1]

    net = NetworkSpec(name, input_shape, tuple(layers))
    validate_network(net)
    return net


def parse_network(document: str) -> NetworkSpec:
    """Parse a JSON network description; syntax errors report line/column."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return network_from_dict(doc)


def load_network(path) -> NetworkSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network(fh.read())


def _pad_to_json(layer: LayerSpec) -> Any:
    if layer.pad_spec == "same":
        return "same"
    if isinstance(layer.pad_spec, tuple):
        return list(layer.pad_spec)
    return layer.pad_spec


def network_to_dict(net: NetworkSpec) -> dict:
    layers = []
    for layer in net.layers:
        if layer.kind is LayerKind.ACTIVATION:
            layers.append({"type": "activation", "ic": layer.ic, "oc": layer.oc,
                           "act": layer.act})
        elif layer.kind is LayerKind.POOL:
            layers.append({"type": "pool", "ic": layer.ic, "oc": layer.oc,
                           "kx": layer.kx, "ky": layer.ky, "stride": layer.stride,
                           "pad": _pad_to_json(layer)})
        else:
            ltype = "depthwise" if layer.kind is LayerKind.DEPTHWISE else "conv"
            layers.append({"type": ltype, "ic": layer.ic, "oc": layer.oc,
                           "kx": layer.kx, "ky": layer.ky, "dilation": layer.dilation,
                           "stride": layer.stride, "pad": _pad_to_json(layer)})
    return {
        "name": net.name,
        "input_shape": {"c": net.input_shape.c, "h": net.input_shape.h, "w": net.input_shape.w},
        "layers": layers,
    }


def serialize_network(net: NetworkSpec) -> str:
    return json.dumps(network_to_dict(net), indent=2) + "\n"


def save_network(net: NetworkSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_network(net))


# Convenience constructors used across the package and in tests.

def conv(ic: int, oc: int, k: int = 3, *, stride: int = 1, dilation: int = 0,
         pad: Any = 0, ky: int | None = None) -> LayerSpec:
    ky = k if ky is None else ky
    kind = LayerKind.POINTWISE if k == ky == 1 and dilation == 0 else LayerKind.REGULAR
    return _with_pad(LayerSpec(kind, ic=ic, oc=oc, kx=k, ky=ky,
                               dilation=0 if kind is LayerKind.POINTWISE else dilation,
                               stride=stride), pad)


def depthwise(c: int, k: int = 3, *, stride: int = 1, dilation: int = 0,
              pad: Any = 0, ky: int | None = None) -> LayerSpec:
    return _with_pad(LayerSpec(LayerKind.DEPTHWISE, ic=c, oc=c, kx=k,
                               ky=k if ky is None else ky,
                               dilation=dilation, stride=stride), pad)


def activation(c: int, act: str = "relu") -> LayerSpec:
    return LayerSpec(LayerKind.ACTIVATION, ic=c, oc=c, act=act)


def pool(c: int, k: int, *, stride: int | None = None, pad: Any = 0) -> LayerSpec:
    return _with_pad(LayerSpec(LayerKind.POOL, ic=c, oc=c, kx=k, ky=k,
                               stride=k if stride is None else stride), pad)


def same_pad(layer: LayerSpec) -> LayerSpec:
    """Stride-1 symmetric padding that preserves spatial size."""
    ty = (layer.extent_y - 1) // 2
    tx = (layer.extent_x - 1) // 2
    quad = (ty, layer.extent_y - 1 - ty, tx, layer.extent_x - 1 - tx)
    spec: Any = quad[0] if len(set(quad)) == 1 else quad
    return LayerSpec(layer.kind, ic=layer.ic, oc=layer.oc, kx=layer.kx, ky=layer.ky,
                     dilation=layer.dilation, stride=layer.stride, pad=quad,
                     pad_spec=spec, act=layer.act)


def _with_pad(layer: LayerSpec, pad: Any) -> LayerSpec:
    if pad == "same":
        return same_pad(layer)
    if isinstance(pad, int):
        quad = (pad, pad, pad, pad)
        spec: Any = pad
    else:
        quad = tuple(pad)  # type: ignore[assignment]
        spec = quad
    return LayerSpec(layer.kind, ic=layer.ic, oc=layer.oc, kx=layer.kx, ky=layer.ky,
                     dilation=layer.dilation, stride=layer.stride, pad=quad,
                     pad_spec=spec, act=layer.act)
