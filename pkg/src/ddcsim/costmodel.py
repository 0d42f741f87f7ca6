"""Workload accounting and the dilated-depthwise cascade rewrite.

Cost metrics follow the accelerator's conventions: multiply-accumulate counts
are normalized by the *network input* pixel count, weights are counted without
biases, and a dilated kernel contributes only its kx*ky nonzero taps.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .netir import (
    LayerKind,
    LayerSpec,
    NetworkSpec,
    activation,
    infer_shapes,
    validate_network,
)


class RewriteError(ValueError):
    """Raised when a rewrite rule set cannot be applied cleanly."""


@dataclass(frozen=True)
class LayerCost:
    index: int
    kind: str
    kx: int
    ky: int
    dilation: int
    ic: int
    oc: int
    macs_per_input_pixel: Fraction
    weight_count: int
    weight_bytes: int


@dataclass(frozen=True)
class CostReport:
    per_layer: tuple[LayerCost, ...]
    bytes_per_weight: int

    @property
    def total_macs_per_input_pixel(self) -> Fraction:
        return sum((c.macs_per_input_pixel for c in self.per_layer), Fraction(0))

    @property
    def total_weight_count(self) -> int:
        return sum(c.weight_count for c in self.per_layer)

    @property
    def total_weight_bytes(self) -> int:
        return sum(c.weight_bytes for c in self.per_layer)


def _layer_weights(layer: LayerSpec) -> int:
    if layer.kind is LayerKind.DEPTHWISE:
        return layer.kx * layer.ky * layer.oc
    if layer.is_conv:
        return layer.kx * layer.ky * layer.ic * layer.oc
    return 0


def compute_cost(net: NetworkSpec, bytes_per_weight: int = 1) -> CostReport:
    """Per-layer and total MACs/input-pixel and weight bytes."""
    if bytes_per_weight < 1:
        raise ValueError("bytes_per_weight must be >= 1")
    shapes = infer_shapes(net)
    input_pixels = net.input_shape.pixels
    rows = []
    for i, layer in enumerate(net.layers):
        weights = _layer_weights(layer)
        if layer.kind is LayerKind.DEPTHWISE:
            macs = layer.kx * layer.ky * layer.oc * shapes[i + 1].pixels
        elif layer.is_conv:
            macs = layer.kx * layer.ky * layer.ic * layer.oc * shapes[i + 1].pixels
        else:
            macs = 0
        rows.append(LayerCost(
            index=i,
            kind=layer.kind.value,
            kx=layer.kx, ky=layer.ky, dilation=layer.dilation,
            ic=layer.ic, oc=layer.oc,
            macs_per_input_pixel=Fraction(macs, input_pixels),
            weight_count=weights,
            weight_bytes=weights * bytes_per_weight,
        ))
    return CostReport(tuple(rows), bytes_per_weight)


def macs_per_input_pixel(net: NetworkSpec) -> CostReport:
    return compute_cost(net, 1)


def model_size_bytes(net: NetworkSpec, bytes_per_weight: int = 1) -> CostReport:
    return compute_cost(net, bytes_per_weight)


# --------------------------------------------------------------------------
# Cascade rewrite: a run of n stride-1 dense 3x3 regular convolutions becomes
# one depthwise 3x3 with dilation n-1 (same receptive field), an activation,
# and a 1x1 pointwise convolution restoring the run's output channel count.
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RewriteRule:
    cascade_length: int
    insert_pointwise: bool = True

    def __post_init__(self) -> None:
        if self.cascade_length not in (2, 3):
            raise ValueError("cascade_length must be 2 or 3")

    @property
    def dilation(self) -> int:
        return self.cascade_length - 1


DEFAULT_RULES = (RewriteRule(3), RewriteRule(2))


def _is_cascade_conv(layer: LayerSpec) -> bool:
    return (layer.kind is LayerKind.REGULAR and layer.kx == 3 and layer.ky == 3
            and layer.dilation == 0 and layer.stride == 1)


def _find_runs(net: NetworkSpec) -> list[list[int]]:
    """Maximal runs of rewriteable convs; a run may have interleaved activations."""
    runs: list[list[int]] = []
    current: list[int] = []
    i = 0
    n = len(net.layers)
    while i < n:
        layer = net.layers[i]
        if _is_cascade_conv(layer):
            current.append(i)
            i += 1
            # a single activation may separate cascade members
            if (i < n and net.layers[i].kind is LayerKind.ACTIVATION
                    and i + 1 < n and _is_cascade_conv(net.layers[i + 1])):
                i += 1
            continue
        if current:
            runs.append(current)
            current = []
        i += 1
    if current:
        runs.append(current)
    return runs


def _sum_pads(layers: Sequence[LayerSpec]) -> tuple[int, int, int, int]:
    pt = sum(l.pad[0] for l in layers)
    pb = sum(l.pad[1] for l in layers)
    pl = sum(l.pad[2] for l in layers)
    pr = sum(l.pad[3] for l in layers)
    return pt, pb, pl, pr


def _replacement(chunk: Sequence[LayerSpec], rule: RewriteRule) -> list[LayerSpec]:
    c_in = chunk[0].ic
    c_out = chunk[-1].oc
    pads = _sum_pads(chunk)
    pad_spec = pads[0] if len(set(pads)) == 1 else pads
    dw = LayerSpec(LayerKind.DEPTHWISE, ic=c_in, oc=c_in, kx=3, ky=3,
                   dilation=rule.dilation, stride=1, pad=pads, pad_spec=pad_spec)
    out = [dw, activation(c_in)]
    if rule.insert_pointwise:
        out.append(LayerSpec(LayerKind.POINTWISE, ic=c_in, oc=c_out, kx=1, ky=1))
    elif c_in != c_out:
        raise RewriteError(
            f"rule n={rule.cascade_length} without pointwise needs matching channels, "
            f"got {c_in} -> {c_out}"
        )
    return out


def ddc_rewrite(net: NetworkSpec, rules: Iterable[RewriteRule] = DEFAULT_RULES) -> NetworkSpec:
    """Replace matched 3x3 cascades; non-matched layers pass through unchanged.

    Rules are applied greedily left-to-right within each maximal run, longest
    cascade first.  Two rules with the same length would claim the same
    layers, which is reported as an overlap error.
    """
    rules = list(rules)
    lengths = [r.cascade_length for r in rules]
    if len(lengths) != len(set(lengths)):
        raise RewriteError("overlapping rules: duplicate cascade lengths")
    by_length = sorted(rules, key=lambda r: -r.cascade_length)

    runs = _find_runs(net)
    consumed: dict[int, tuple[tuple[int, ...], RewriteRule]] = {}
    for run in runs:
        pos = 0
        while pos < len(run):
            rule = next((r for r in by_length if r.cascade_length <= len(run) - pos), None)
            if rule is None:
                break
            chunk = tuple(run[pos:pos + rule.cascade_length])
            consumed[chunk[0]] = (chunk, rule)
            pos += rule.cascade_length

    out_layers: list[LayerSpec] = []
    skip: set[int] = set()
    for i, layer in enumerate(net.layers):
        if i in skip:
            continue
        if i in consumed:
            chunk, rule = consumed[i]
            members = [net.layers[j] for j in chunk]
            out_layers.extend(_replacement(members, rule))
            # drop the chunk's convs and the activations between them
            skip.update(range(chunk[0], chunk[-1] + 1))
            # keep an activation that trails the chunk's last conv, rewired to
            # the replacement's output channel width
            nxt = chunk[-1] + 1
            if nxt < len(net.layers) and net.layers[nxt].kind is LayerKind.ACTIVATION:
                tail = net.layers[nxt]
                out_layers.append(activation(out_layers[-1].oc, tail.act or "relu"))
                skip.add(nxt)
            continue
        out_layers.append(layer)

    result = NetworkSpec(net.name + "-ddc" if net.name else "ddc",
                         net.input_shape, tuple(out_layers))
    validate_network(result)
    return result


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

COST_CSV_HEADER = "layer,kind,kx,ky,dilation,ic,oc,macs_per_input_pixel,weight_bytes"


def _frac_str(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return repr(float(value))


def cost_csv(report: CostReport) -> str:
    out = io.StringIO()
    out.write(COST_CSV_HEADER + "\n")
    for row in report.per_layer:
        out.write(f"{row.index},{row.kind},{row.kx},{row.ky},{row.dilation},"
                  f"{row.ic},{row.oc},{_frac_str(row.macs_per_input_pixel)},"
                  f"{row.weight_bytes}\n")
    out.write(f"total,,,,,,,{_frac_str(report.total_macs_per_input_pixel)},"
              f"{report.total_weight_bytes}\n")
    return out.getvalue()


def read_cost_csv(text: str) -> list[dict]:
    """Parse rows written by cost_csv back into dictionaries (totals row included)."""
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    if not lines or lines[0] != COST_CSV_HEADER:
        raise ValueError("not a cost CSV")
    names = COST_CSV_HEADER.split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(names):
            raise ValueError(f"malformed cost CSV row: {line!r}")
        rows.append(dict(zip(names, parts)))
    return rows
