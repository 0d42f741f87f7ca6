"""Analytical timing model for the dual-mode convolution accelerator.

Per spatial block, a layer costs max(memory cycles, compute cycles):

regular convolutions
    t_mem  = max( IC * ceil(IN*IM / BW_FM) * ceil(OC / PE_num),
                  IC * OC * ceil(X*Y / BW_W) )
    t_comp = X*Y * IC * ceil(ON*OM / MAC_PE) * ceil(OC / PE_num)

depthwise convolutions
    t_mem  = max( OC * ceil(IN*IM / BW_FM), OC * ceil(X*Y / BW_W) )
    t_comp = X*Y * ceil(ON*OM / MAC_PE) * ceil(OC / PE_num)

IN/IM default to ON + extent - 1 and OM + extent - 1 so dilated kernels
enlarge the transferred halo.  A network's total multiplies each layer time
by its output-block count; edge blocks are charged full-block cost.
"""

from __future__ import annotations

import enum
import io
import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Sequence

from .netir import (
    CONV_KINDS,
    LayerKind,
    LayerSpec,
    NetworkSpec,
    TensorShape,
    infer_shapes,
    validate_network,
)


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


MAX_KERNEL = 7                # reference accelerator filter limit per axis
MAX_FRAME = (640, 480)        # VGA, the reference accelerator's input ceiling

FPS_NOTE = ("accelerator cycles only; measured frame rates additionally "
            "include host-CPU post-processing")


@dataclass(frozen=True)
class HardwareConfig:
    """Accelerator parameters.

    `in_block_h`/`in_block_w` may be pinned explicitly; left as None they are
    derived per layer from the output block plus the kernel halo.  When
    `weights_per_block` is False, filter weights are charged once per layer
    and output group instead of once per spatial block (sensitivity toggle).
    """

    pe_num: int
    mac_pe: int
    bw_fm: int
    bw_w: int
    out_block_h: int
    out_block_w: int
    in_block_h: int | None = None
    in_block_w: int | None = None
    clock_hz: float = 400e6
    fm_memory_bytes: int = 4096 * 1024
    w_memory_bytes: int = 2048 * 1024
    aplpu_block_latency: int = 0
    weights_per_block: bool = True

    def __post_init__(self) -> None:
        for name in ("pe_num", "mac_pe", "bw_fm", "bw_w", "out_block_h", "out_block_w"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.in_block_h is not None and self.in_block_h < self.out_block_h:
            raise ValueError("input block height must cover the output block")
        if self.in_block_w is not None and self.in_block_w < self.out_block_w:
            raise ValueError("input block width must cover the output block")

    @property
    def macs_per_cycle(self) -> int:
        return self.pe_num * self.mac_pe

    def input_block(self, layer: LayerSpec) -> tuple[int, int]:
        ih = self.in_block_h if self.in_block_h is not None else self.out_block_h + layer.extent_y - 1
        iw = self.in_block_w if self.in_block_w is not None else self.out_block_w + layer.extent_x - 1
        return ih, iw


PROFILES: dict[str, HardwareConfig] = {
    # 8 cores * 64 MACs = 512 MACs/cycle at 400 MHz
    "proposed": HardwareConfig(pe_num=8, mac_pe=64, bw_fm=16, bw_w=16,
                               out_block_h=16, out_block_w=16),
    # equal MAC budget, organized for intra-kernel 3x3 parallelism
    "related-yu": HardwareConfig(pe_num=64, mac_pe=8, bw_fm=16, bw_w=16,
                                 out_block_h=16, out_block_w=16, clock_hz=200e6),
}


def load_hardware(source: str) -> HardwareConfig:
    """Resolve a named profile or read a JSON file with HardwareConfig fields."""
    if source in PROFILES:
        return PROFILES[source]
    with open(source, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("hardware file must hold an object")
    try:
        return HardwareConfig(**doc)
    except TypeError as exc:
        raise ValueError(f"bad hardware config: {exc}") from None


class Bound(enum.Enum):
    MEMORY = "memory"
    COMPUTE = "compute"
    BALANCED = "balanced"


@dataclass(frozen=True)
class LayerTiming:
    t_mem: int
    t_comp: int
    layer: LayerSpec | None = None
    hw: HardwareConfig | None = None

    @property
    def t_layer(self) -> int:
        return max(self.t_mem, self.t_comp)

    @property
    def bound(self) -> Bound:
        if self.t_mem == self.t_comp:
            return Bound.BALANCED
        return Bound.MEMORY if self.t_mem > self.t_comp else Bound.COMPUTE


def _check_kind(layer: LayerSpec, wanted: str) -> None:
    if wanted == "regular" and layer.kind not in (LayerKind.REGULAR, LayerKind.POINTWISE):
        raise ValueError(f"{layer.describe()}: regular-mode timing needs a regular/pointwise conv")
    if wanted == "depthwise" and layer.kind is not LayerKind.DEPTHWISE:
        raise ValueError(f"{layer.describe()}: depthwise-mode timing needs a depthwise conv")


def regular_layer_times(layer: LayerSpec, hw: HardwareConfig) -> LayerTiming:
    """Per-block memory and compute cycles of a regular (or pointwise) conv."""
    _check_kind(layer, "regular")
    ih, iw = hw.input_block(layer)
    taps = layer.kx * layer.ky
    groups = ceil_div(layer.oc, hw.pe_num)
    t_feat = layer.ic * ceil_div(ih * iw, hw.bw_fm) * groups
    t_wgt = layer.ic * layer.oc * ceil_div(taps, hw.bw_w)
    t_comp = taps * layer.ic * ceil_div(hw.out_block_h * hw.out_block_w, hw.mac_pe) * groups
    return LayerTiming(t_mem=max(t_feat, t_wgt), t_comp=t_comp, layer=layer, hw=hw)


def depthwise_layer_times(layer: LayerSpec, hw: HardwareConfig) -> LayerTiming:
    """Per-block memory and compute cycles of a depthwise conv."""
    _check_kind(layer, "depthwise")
    ih, iw = hw.input_block(layer)
    taps = layer.kx * layer.ky
    t_feat = layer.oc * ceil_div(ih * iw, hw.bw_fm)
    t_wgt = layer.oc * ceil_div(taps, hw.bw_w)
    t_comp = (taps * ceil_div(hw.out_block_h * hw.out_block_w, hw.mac_pe)
              * ceil_div(layer.oc, hw.pe_num))
    return LayerTiming(t_mem=max(t_feat, t_wgt), t_comp=t_comp, layer=layer, hw=hw)


def layer_times(layer: LayerSpec, hw: HardwareConfig) -> LayerTiming:
    if layer.kind is LayerKind.DEPTHWISE:
        return depthwise_layer_times(layer, hw)
    return regular_layer_times(layer, hw)


@dataclass(frozen=True)
class TimingRow:
    index: int
    kind: str
    t_mem: int
    t_comp: int
    t_layer: int
    bound: str
    blocks: int
    total: int


@dataclass(frozen=True)
class TimingReport:
    per_layer: tuple[TimingRow, ...]
    total_cycles: int
    clock_hz: float
    notes: str = FPS_NOTE

    @property
    def fps(self) -> float | None:
        if self.total_cycles == 0:
            return None
        return self.clock_hz / self.total_cycles


def network_time(net: NetworkSpec, hw: HardwareConfig,
                 frame: TensorShape | None = None) -> TimingReport:
    """Whole-network cycle count over spatial blocks.

    Activation and pooling layers ride the pipeline for free unless the
    hardware config carries a per-block APLPU latency.
    """
    if frame is not None:
        net = replace(net, input_shape=frame)
    validate_network(net)
    shapes = infer_shapes(net)
    rows = []
    total = 0
    for i, layer in enumerate(net.layers):
        out = shapes[i + 1]
        blocks = ceil_div(out.h, hw.out_block_h) * ceil_div(out.w, hw.out_block_w)
        if layer.is_conv:
            timing = layer_times(layer, hw)
            if hw.weights_per_block or blocks == 1:
                layer_total = timing.t_layer * blocks
            else:
                # weights fetched once per (layer, output group): later blocks
                # see only the feature and compute terms
                ih, iw = hw.input_block(layer)
                groups = ceil_div(layer.oc, hw.pe_num)
                if layer.kind is LayerKind.DEPTHWISE:
                    t_feat = layer.oc * ceil_div(ih * iw, hw.bw_fm)
                else:
                    t_feat = layer.ic * ceil_div(ih * iw, hw.bw_fm) * groups
                steady = max(t_feat, timing.t_comp)
                layer_total = timing.t_layer + steady * (blocks - 1)
            row_tm, row_tc, row_tl = timing.t_mem, timing.t_comp, timing.t_layer
            bound = timing.bound.value
        else:
            row_tm = row_tc = row_tl = hw.aplpu_block_latency
            layer_total = row_tl * blocks
            bound = Bound.BALANCED.value
        rows.append(TimingRow(i, layer.kind.value, row_tm, row_tc, row_tl,
                              bound, blocks, layer_total))
        total += layer_total
    return TimingReport(tuple(rows), total, hw.clock_hz)


def check_frame_limit(frame: TensorShape, limit: tuple[int, int] = MAX_FRAME) -> None:
    if frame.h > limit[0] or frame.w > limit[1]:
        raise ValueError(f"frame {frame.h}x{frame.w} exceeds the {limit[0]}x{limit[1]} input limit")


# --------------------------------------------------------------------------
# Hardware utilization of MAC units (related accelerators vs this design)
# --------------------------------------------------------------------------

UTILIZATION_MODELS = ("liu", "su", "yu", "proposed")


def utilization(model: str, kind: LayerKind, x: int, y: int, *,
                t_m: int = 8, alpha: int | None = None) -> Fraction:
    """Fraction of MAC units doing useful work for one layer kind.

    liu: zero-filled kernels share the regular datapath, 1/t_m on depthwise.
    su: split regular/depthwise engines, half idle (with balanced sizing).
    yu: intra-kernel 3x3 tiling; alpha defaults to ceil(x/3)*ceil(y/3).
    proposed: fully utilized in both modes.
    """
    if model not in UTILIZATION_MODELS:
        raise ValueError(f"unknown utilization model {model!r}")
    if x < 1 or y < 1:
        raise ValueError("kernel must be >= 1x1")
    if t_m < 1:
        raise ValueError("t_m must be >= 1")
    if alpha is not None and alpha < 1:
        raise ValueError("alpha must be >= 1")
    if kind not in CONV_KINDS:
        raise ValueError("utilization is defined for convolution kinds")
    if kind is not LayerKind.DEPTHWISE:
        return Fraction(1)
    if model == "liu":
        return Fraction(1, t_m)
    if model == "su":
        return Fraction(1, 2)
    if model == "yu":
        tiles = alpha if alpha is not None else ceil_div(x, 3) * ceil_div(y, 3)
        return min(Fraction(1), Fraction(x * y, 9 * tiles))
    return Fraction(1)


def percent(value: Fraction | float) -> int:
    """Whole percent, half rounded away from zero (12.5% reports as 13%)."""
    frac = Fraction(value).limit_denominator(10**9) if not isinstance(value, Fraction) else value
    return int((200 * frac + 1) // 2)


# --------------------------------------------------------------------------
# Compute-time sweeps against the tiling-based related design
# --------------------------------------------------------------------------

def related_kernel_term(x: int, y: int) -> int:
    """Tap count the 3x3-tiled related design effectively pays for an x*y kernel."""
    return ceil_div(x, 3) * ceil_div(y, 3) * 9


def compute_cycles(layer: LayerSpec, hw: HardwareConfig, *, kernel_term: int | None = None) -> int:
    """Compute-time half of the model, with an overridable kernel term."""
    taps = kernel_term if kernel_term is not None else layer.kx * layer.ky
    base = taps * ceil_div(hw.out_block_h * hw.out_block_w, hw.mac_pe) * ceil_div(layer.oc, hw.pe_num)
    if layer.kind is LayerKind.DEPTHWISE:
        return base
    return base * layer.ic


@dataclass(frozen=True)
class SweepPoint:
    channels: int
    t_proposed: int
    t_related: int


def comparison_sweep(hw_proposed: HardwareConfig, hw_related: HardwareConfig,
                     kind: LayerKind, x: int, y: int,
                     channel_range: Sequence[int]) -> tuple[SweepPoint, ...]:
    """Compute time vs channel count, proposed model against the related
    design's 3x3-tiling approximation (IC = OC at every sweep point)."""
    if not channel_range:
        raise ValueError("empty channel range")
    if kind not in CONV_KINDS:
        raise ValueError("sweep kinds are regular or depthwise")
    points = []
    for c in channel_range:
        if c < 1:
            raise ValueError("channel counts must be >= 1")
        layer = LayerSpec(kind, ic=c, oc=c, kx=x, ky=y)
        t_p = compute_cycles(layer, hw_proposed)
        t_r = compute_cycles(layer, hw_related, kernel_term=related_kernel_term(x, y))
        points.append(SweepPoint(c, t_p, t_r))
    return tuple(points)


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

TIMING_CSV_HEADER = "layer,t_mem,t_comp,t_layer,bound,blocks,total"
SWEEP_CSV_HEADER = "channels,t_proposed,t_related"


def timing_csv(report: TimingReport) -> str:
    out = io.StringIO()
    out.write(f"# note: {report.notes}\n")
    out.write(TIMING_CSV_HEADER + "\n")
    for row in report.per_layer:
        out.write(f"{row.index},{row.t_mem},{row.t_comp},{row.t_layer},"
                  f"{row.bound},{row.blocks},{row.total}\n")
    fps = report.fps
    out.write(f"total,,,,,,{report.total_cycles}\n")
    out.write(f"# fps: {'n/a' if fps is None else f'{fps:.2f}'}\n")
    return out.getvalue()


def read_timing_csv(text: str) -> list[dict]:
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    if not lines or lines[0] != TIMING_CSV_HEADER:
        raise ValueError("not a timing CSV")
    names = TIMING_CSV_HEADER.split(",")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(names):
            raise ValueError(f"malformed timing CSV row: {line!r}")
        rows.append(dict(zip(names, parts)))
    return rows


def sweep_csv(points: Iterable[SweepPoint], label: str = "") -> str:
    out = io.StringIO()
    if label:
        out.write(f"# panel: {label}\n")
    out.write("# related model: approximate (3x3-tiling reconstruction)\n")
    out.write(SWEEP_CSV_HEADER + "\n")
    for p in points:
        out.write(f"{p.channels},{p.t_proposed},{p.t_related}\n")
    return out.getvalue()


def read_sweep_csv(text: str) -> list[SweepPoint]:
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    if not lines or lines[0] != SWEEP_CSV_HEADER:
        raise ValueError("not a sweep CSV")
    points = []
    for line in lines[1:]:
        c, tp, tr = line.split(",")
        points.append(SweepPoint(int(c), int(tp), int(tr)))
    return points
