"""Command-line surface.

Subcommands: report-cost, report-time, compare, simulate, rewrite, check.
Exit codes: 0 success, 1 parse/validation failure, 2 internal inconsistency
(a failed pipeline verdict or a functional mismatch).
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import costmodel, funcsim, netir, perfmodel, pipesim
from .netir import LayerKind, NetworkSpec, TensorShape

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INCONSISTENT = 2


def bundled_config_names() -> list[str]:
    root = resources.files("ddcsim") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_network_path(arg: str) -> str:
    """A plain path, or the name of a bundled example config."""
    if Path(arg).exists():
        return arg
    name = arg.removeprefix("bundled:").removesuffix(".json")
    candidate = resources.files("ddcsim") / "configs" / f"{name}.json"
    if candidate.is_file():
        return str(candidate)
    raise netir.ParseError(
        f"no such file {arg!r} (bundled configs: {', '.join(bundled_config_names())})"
    )


def _load_net(arg: str) -> NetworkSpec:
    return netir.load_network(resolve_network_path(arg))


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_frame(spec: str) -> TensorShape:
    try:
        h, w = (int(p) for p in spec.lower().split("x"))
        return TensorShape(3, h, w)
    except (ValueError, netir.ValidationError):
        raise argparse.ArgumentTypeError(f"frame must look like 640x480, got {spec!r}")


def _parse_channels(spec: str) -> list[int]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise argparse.ArgumentTypeError("channel range must be lo:hi[:step]")
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        return list(range(lo, hi + 1, step))
    return [int(p) for p in spec.split(",") if p]


def _parse_kernel(spec: str) -> tuple[int, int]:
    if "x" in spec.lower():
        x, y = (int(p) for p in spec.lower().split("x"))
        return x, y
    k = int(spec)
    return k, k


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_report_cost(args: argparse.Namespace) -> int:
    net = _load_net(args.net)
    report = costmodel.compute_cost(net, args.bytes_per_weight)
    if args.format == "csv":
        _emit(costmodel.cost_csv(report), args.out)
    else:
        lines = [f"network: {net.name or args.net}"]
        for row in report.per_layer:
            lines.append(f"  layer {row.index:3d} {row.kind:10s} {row.kx}x{row.ky} d={row.dilation} "
                         f"{row.ic:4d}->{row.oc:<4d} macs/px={float(row.macs_per_input_pixel):10.3f} "
                         f"bytes={row.weight_bytes}")
        lines.append(f"total: {float(report.total_macs_per_input_pixel):.3f} MACs/input pixel, "
                     f"{report.total_weight_bytes} weight bytes")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_report_time(args: argparse.Namespace) -> int:
    net = _load_net(args.net)
    hw = perfmodel.load_hardware(args.hw)
    frame = args.frame
    check_shape = frame if frame is not None else net.input_shape
    if args.hw == "proposed":
        perfmodel.check_frame_limit(TensorShape(1, check_shape.h, check_shape.w))
        netir.validate_network(net, max_kernel=perfmodel.MAX_KERNEL)
    if frame is not None:
        frame = TensorShape(net.input_shape.c, frame.h, frame.w)
    report = perfmodel.network_time(net, hw, frame)
    text = perfmodel.timing_csv(report) if args.format == "csv" else _timing_text(report)
    if args.baseline:
        base_net = _load_net(args.baseline)
        base = perfmodel.network_time(base_net, hw, frame)
        if base.total_cycles:
            ratio = 100.0 * report.total_cycles / base.total_cycles
            text += (f"# cycles vs baseline: {ratio:.1f}% "
                     f"(accelerator cycles only; published end-to-end reference: 83%, "
                     f"which includes host-CPU post-processing)\n")
    _emit(text, args.out)
    return EXIT_OK


def _timing_text(report: perfmodel.TimingReport) -> str:
    lines = []
    for row in report.per_layer:
        lines.append(f"  layer {row.index:3d} {row.kind:10s} t_mem={row.t_mem:8d} "
                     f"t_comp={row.t_comp:8d} t_layer={row.t_layer:8d} [{row.bound}] "
                     f"blocks={row.blocks:5d} total={row.total}")
    fps = report.fps
    lines.append(f"total cycles: {report.total_cycles}")
    lines.append(f"fps: {'n/a' if fps is None else f'{fps:.2f}'} ({report.notes})")
    return "\n".join(lines) + "\n"


_PANELS = ((LayerKind.REGULAR, 3, 3), (LayerKind.DEPTHWISE, 3, 3),
           (LayerKind.REGULAR, 5, 5), (LayerKind.DEPTHWISE, 5, 5))


def cmd_compare(args: argparse.Namespace) -> int:
    hw_p = perfmodel.load_hardware(args.hw)
    hw_r = perfmodel.load_hardware(args.related_hw)
    channels = args.channels
    if not channels:
        raise ValueError("empty channel range")
    if args.kind or args.kernel:
        kind = LayerKind.DEPTHWISE if args.kind == "depthwise" else LayerKind.REGULAR
        kx, ky = args.kernel or (3, 3)
        panels = [(kind, kx, ky)]
    else:
        panels = list(_PANELS)
    chunks = []
    for kind, kx, ky in panels:
        points = perfmodel.comparison_sweep(hw_p, hw_r, kind, kx, ky, channels)
        chunks.append(perfmodel.sweep_csv(points, label=f"{kind.value} {kx}x{ky}"))
    _emit("".join(chunks), args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    net = _load_net(args.net)
    hw = perfmodel.load_hardware(args.hw)
    if args.hw == "proposed":
        netir.validate_network(net, max_kernel=perfmodel.MAX_KERNEL)
    convs = net.conv_layers()
    if not convs:
        raise netir.ValidationError("network has no convolution layers to simulate")
    wanted = args.layer
    match = next(((i, l) for i, l in convs if i == wanted), None) if wanted is not None else convs[0]
    if match is None:
        raise netir.ValidationError(f"layer {wanted} is not a convolution layer")
    _, layer = match
    trace = pipesim.simulate(layer, hw, blocks=args.blocks)
    timing = perfmodel.layer_times(layer, hw)
    verdict = pipesim.check_against_analytical(trace, timing)
    text = pipesim.trace_csv(trace)
    text += (f"# verdict: {'pass' if verdict.passed else 'FAIL'} "
             f"analytical={verdict.analytical} simulated={pipesim._cycles_str(verdict.simulated)} "
             f"fill_bound={pipesim._cycles_str(verdict.fill_bound)}\n")
    _emit(text, args.out)
    return EXIT_OK if verdict.passed else EXIT_INCONSISTENT


def cmd_rewrite(args: argparse.Namespace) -> int:
    net = _load_net(args.net)
    rules = [costmodel.RewriteRule(n) for n in args.rules]
    rewritten = costmodel.ddc_rewrite(net, rules)
    before = costmodel.compute_cost(net)
    after = costmodel.compute_cost(rewritten)
    rf_before, rf_after = netir.receptive_field(net), netir.receptive_field(rewritten)
    doc = netir.serialize_network(rewritten)
    if args.out:
        Path(args.out).write_text(doc, encoding="utf-8")
    else:
        sys.stdout.write(doc)
    report = (
        f"macs/input px: {float(before.total_macs_per_input_pixel):.3f} -> "
        f"{float(after.total_macs_per_input_pixel):.3f}\n"
        f"weight bytes:  {before.total_weight_bytes} -> {after.total_weight_bytes}\n"
        f"receptive field: {rf_before[0]}x{rf_before[1]} -> {rf_after[0]}x{rf_after[1]}\n"
    )
    (sys.stdout if args.out else sys.stderr).write(report)
    return EXIT_OK


def _random_weights(rng: np.random.Generator, layer, exponent: int) -> funcsim.QuantWeights:
    if layer.kind is LayerKind.DEPTHWISE:
        shape = (layer.oc, layer.ky, layer.kx)
        kind = LayerKind.DEPTHWISE
    else:
        shape = (layer.oc, layer.ic, layer.ky, layer.kx)
        kind = LayerKind.REGULAR
    data = rng.integers(-64, 64, size=shape, dtype=np.int8)
    return funcsim.QuantWeights(kind, data, exponent)


def generate_stimuli(net: NetworkSpec, seed: int):
    """Seeded input, weights, and activation shifts for equivalence checks."""
    rng = np.random.default_rng(seed)
    data = rng.integers(-64, 64, size=(net.input_shape.c, net.input_shape.h, net.input_shape.w),
                        dtype=np.int8)
    inp = funcsim.QuantTensor(net.input_shape, data, -7)
    weights = [_random_weights(rng, l, -7) for l in net.layers if l.is_conv]
    shifts = []
    for i, l in enumerate(net.layers):
        if l.kind is LayerKind.ACTIVATION:
            prev = net.layers[i - 1] if i else None
            if prev is not None and prev.is_conv:
                taps = prev.kx * prev.ky * (1 if prev.kind is LayerKind.DEPTHWISE else prev.ic)
                shifts.append(max(int(taps).bit_length() + 4, 1))
            else:
                shifts.append(0)
    return inp, weights, shifts


def cmd_check(args: argparse.Namespace) -> int:
    net = _load_net(args.net)
    hw = perfmodel.load_hardware(args.hw)
    inp, weights, shifts = generate_stimuli(net, args.seed)
    ref = funcsim.run_network(inp, net, weights, order="oracle", act_shifts=shifts)
    got = funcsim.run_network(inp, net, weights, hw=hw, order="blocked", act_shifts=shifts)
    if np.array_equal(ref.data, got.data):
        print(f"check pass: oracle and blocked orders agree on all "
              f"{ref.data.size} values (seed {args.seed})")
        return EXIT_OK
    diff = np.argwhere(ref.data != got.data)
    c, y, x = (int(v) for v in diff[0])
    print(f"check FAIL: first mismatch at (c={c}, y={y}, x={x}): "
          f"oracle={int(ref.data[c, y, x])} blocked={int(got.data[c, y, x])}",
          file=sys.stderr)
    return EXIT_INCONSISTENT


# --------------------------------------------------------------------------
# Argument wiring
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddcsim",
        description="Dual-mode CNN accelerator: cost reports, timing model, "
                    "pipeline traces, cascade rewrites, and functional checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, hw: bool = True) -> None:
        p.add_argument("--format", choices=("csv", "text"), default="csv")
        p.add_argument("--out", help="write output to this path instead of stdout")
        p.add_argument("--seed", type=int, default=0)
        if hw:
            p.add_argument("--hw", default="proposed",
                           help="hardware profile name (proposed, related-yu) or JSON file")

    p = sub.add_parser("report-cost", help="MACs/input-pixel and model size per layer")
    p.add_argument("net", help="network description file or bundled config name")
    p.add_argument("--bytes-per-weight", type=int, default=1)
    common(p, hw=False)
    p.set_defaults(func=cmd_report_cost)

    p = sub.add_parser("report-time", help="analytical cycle counts per layer")
    p.add_argument("net")
    p.add_argument("--frame", type=_parse_frame, default=None,
                   help="override frame size, e.g. 640x480")
    p.add_argument("--baseline", help="second network to report a cycle ratio against")
    common(p)
    p.set_defaults(func=cmd_report_time)

    p = sub.add_parser("compare", help="compute-time sweep vs the related design")
    p.add_argument("--kind", choices=("regular", "depthwise"))
    p.add_argument("--kernel", type=_parse_kernel, help="kernel size, e.g. 5 or 5x5")
    p.add_argument("--channels", type=_parse_channels, default=list(range(8, 129, 8)),
                   help="comma list or lo:hi[:step] range")
    p.add_argument("--related-hw", default="related-yu")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="pipeline stage trace for one layer")
    p.add_argument("net")
    p.add_argument("--layer", type=int, default=None, help="layer index (default: first conv)")
    p.add_argument("--blocks", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rewrite", help="replace 3x3 cascades with dilated depthwise + pointwise")
    p.add_argument("net")
    p.add_argument("--rules", type=lambda s: [int(p) for p in s.split(",")], default=[3, 2],
                   help="cascade lengths to match, e.g. 3,2")
    common(p, hw=False)
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("check", help="oracle vs blocked bit-exactness on seeded stimuli")
    p.add_argument("net")
    common(p)
    p.set_defaults(func=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (netir.ParseError, netir.ValidationError, costmodel.RewriteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
