"""Event-level simulator of the transfer / multiply / accumulate / ReLU
pipeline, driven by the accelerator's four-level loop schedule.

Regular mode: each output-channel group runs one pass of IC uniform slots;
slot i transfers input map i (with that slot's share of filter weights),
multiplies it one period later, accumulates the period after, and the group's
ReLU occupies the final period, so a pass spans (IC + 3) periods.  Depthwise
mode transfers PE_num channels per slot and ReLU follows each chunk, spanning
(ceil(OC / PE_num) + 3) periods per block.

The period is the per-slot bottleneck across the feature stream, the weight
stream, and compute, chosen so that the steady state equals the analytical
per-block time exactly; it is a Fraction when a partial channel group makes
the per-slot weight share non-integral.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .netir import LayerKind, LayerSpec
from .perfmodel import HardwareConfig, LayerTiming, ceil_div, layer_times


class Stage(enum.Enum):
    TRANSFER = "transfer"
    MULTIPLY = "multiply"
    ACCUMULATE = "accumulate"
    RELU = "relu"


@dataclass(frozen=True)
class ChunkRef:
    """What a stage event operates on: a channel slice of one output group
    within one spatial block.  For regular-mode transfer/multiply/accumulate
    the slice is a single input channel."""

    block: int
    group: int
    ch_lo: int
    ch_hi: int
    input_channel: int | None = None

    def __str__(self) -> str:
        if self.input_channel is not None:
            return f"b{self.block}.g{self.group}.ic{self.input_channel}"
        return f"b{self.block}.g{self.group}.ch{self.ch_lo}-{self.ch_hi}"


@dataclass(frozen=True)
class StageEvent:
    stage: Stage
    chunk: ChunkRef
    start_cycle: Fraction
    end_cycle: Fraction


@dataclass(frozen=True)
class PipelineTrace:
    events: tuple[StageEvent, ...]
    total_cycles: Fraction
    mode: LayerKind
    period: Fraction
    group_passes: int
    blocks: int
    layer: LayerSpec
    hw: HardwareConfig


@dataclass(frozen=True)
class ConsistencyVerdict:
    passed: bool
    analytical: int
    simulated: Fraction
    fill_bound: Fraction

    @property
    def slack(self) -> Fraction:
        return self.simulated - self.analytical


def _slot_period(layer: LayerSpec, hw: HardwareConfig) -> tuple[Fraction, int]:
    """(period, passes-or-chunks).  Covers both modes; see module docstring."""
    ih, iw = hw.input_block(layer)
    feat_unit = ceil_div(ih * iw, hw.bw_fm)
    wgt_unit = ceil_div(layer.kx * layer.ky, hw.bw_w)
    comp = layer.kx * layer.ky * ceil_div(hw.out_block_h * hw.out_block_w, hw.mac_pe)
    groups = ceil_div(layer.oc, hw.pe_num)
    if layer.kind is LayerKind.DEPTHWISE:
        period = max(Fraction(layer.oc * feat_unit, groups),
                     Fraction(layer.oc * wgt_unit, groups),
                     Fraction(comp))
    else:
        period = max(Fraction(feat_unit),
                     Fraction(layer.oc * wgt_unit, groups),
                     Fraction(comp))
    return period, groups


def _group_span(oc: int, pe_num: int, g: int) -> tuple[int, int]:
    return g * pe_num, min(oc, (g + 1) * pe_num)


def simulate_regular(layer: LayerSpec, hw: HardwareConfig, blocks: int = 1) -> PipelineTrace:
    if layer.kind not in (LayerKind.REGULAR, LayerKind.POINTWISE):
        raise ValueError(f"{layer.describe()}: regular-mode simulation needs a regular conv")
    if blocks < 1:
        raise ValueError("blocks must be >= 1")
    period, groups = _slot_period(layer, hw)
    ic = layer.ic
    pass_len = (ic + 3) * period
    events: list[StageEvent] = []
    for b in range(blocks):
        for g in range(groups):
            base = (b * groups + g) * pass_len
            lo, hi = _group_span(layer.oc, hw.pe_num, g)
            for i in range(ic):
                ref = ChunkRef(b, g, lo, hi, input_channel=i)
                events.append(StageEvent(Stage.TRANSFER, ref, base + i * period, base + (i + 1) * period))
                events.append(StageEvent(Stage.MULTIPLY, ref, base + (i + 1) * period, base + (i + 2) * period))
                events.append(StageEvent(Stage.ACCUMULATE, ref, base + (i + 2) * period, base + (i + 3) * period))
            relu_ref = ChunkRef(b, g, lo, hi)
            events.append(StageEvent(Stage.RELU, relu_ref, base + (ic + 2) * period, base + (ic + 3) * period))
    total = blocks * groups * pass_len
    events.sort(key=lambda e: (e.start_cycle, e.stage.value))
    return PipelineTrace(tuple(events), total, LayerKind.REGULAR, period, groups, blocks, layer, hw)


def simulate_depthwise(layer: LayerSpec, hw: HardwareConfig, blocks: int = 1) -> PipelineTrace:
    if layer.kind is not LayerKind.DEPTHWISE:
        raise ValueError(f"{layer.describe()}: depthwise-mode simulation needs a depthwise conv")
    if blocks < 1:
        raise ValueError("blocks must be >= 1")
    period, chunks = _slot_period(layer, hw)
    block_len = (chunks + 3) * period
    events: list[StageEvent] = []
    for b in range(blocks):
        base = b * block_len
        for k in range(chunks):
            lo, hi = _group_span(layer.oc, hw.pe_num, k)
            ref = ChunkRef(b, k, lo, hi)
            events.append(StageEvent(Stage.TRANSFER, ref, base + k * period, base + (k + 1) * period))
            events.append(StageEvent(Stage.MULTIPLY, ref, base + (k + 1) * period, base + (k + 2) * period))
            events.append(StageEvent(Stage.ACCUMULATE, ref, base + (k + 2) * period, base + (k + 3) * period))
            events.append(StageEvent(Stage.RELU, ref, base + (k + 3) * period, base + (k + 4) * period))
    total = blocks * block_len
    events.sort(key=lambda e: (e.start_cycle, e.stage.value))
    return PipelineTrace(tuple(events), total, LayerKind.DEPTHWISE, period, 1, blocks, layer, hw)


def simulate(layer: LayerSpec, hw: HardwareConfig, blocks: int = 1) -> PipelineTrace:
    if layer.kind is LayerKind.DEPTHWISE:
        return simulate_depthwise(layer, hw, blocks)
    return simulate_regular(layer, hw, blocks)


def check_against_analytical(trace: PipelineTrace, timing: LayerTiming) -> ConsistencyVerdict:
    """Steady-state throughput must match the analytical block time, with the
    simulated total exceeding it only by pipeline fill (3 periods per pass)."""
    if timing.layer is None or timing.layer != trace.layer or timing.hw != trace.hw:
        raise ValueError("trace and timing were computed from different layer/hardware")
    analytical = timing.t_layer * trace.blocks
    fill = 3 * trace.period * trace.group_passes * trace.blocks
    passed = analytical <= trace.total_cycles <= analytical + fill
    return ConsistencyVerdict(passed, analytical, trace.total_cycles, fill)


# --------------------------------------------------------------------------
# CSV export: one header comment, then stage,chunk,start,end rows.  Times are
# exact (integers, or p/q for fractional periods).
# --------------------------------------------------------------------------

TRACE_CSV_HEADER = "stage,chunk,start,end"


def _cycles_str(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def trace_csv(trace: PipelineTrace) -> str:
    out = io.StringIO()
    out.write(f"# mode={trace.mode.value} period={_cycles_str(trace.period)} "
              f"total={_cycles_str(trace.total_cycles)} "
              f"passes={trace.group_passes} blocks={trace.blocks}\n")
    out.write(TRACE_CSV_HEADER + "\n")
    for e in trace.events:
        out.write(f"{e.stage.value},{e.chunk},{_cycles_str(e.start_cycle)},"
                  f"{_cycles_str(e.end_cycle)}\n")
    return out.getvalue()


def read_trace_csv(text: str) -> list[tuple[str, str, Fraction, Fraction]]:
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    if not lines or lines[0] != TRACE_CSV_HEADER:
        raise ValueError("not a trace CSV")
    rows = []
    for line in lines[1:]:
        stage, chunk, start, end = line.split(",")
        rows.append((stage, chunk, Fraction(start), Fraction(end)))
    return rows
