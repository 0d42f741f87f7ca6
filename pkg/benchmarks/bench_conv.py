"""Benchmark the convolution kernels: numba JIT vs the pure-numpy fallback.

Usage:
    python benchmarks/bench_conv.py [--repeats 5]

Imports both backend modules directly, so DDCSIM_BACKEND does not need to be
set.  The first numba call includes JIT compilation; a warmup run is timed
out separately.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ddcsim.funcsim import _numba_kernels, _numpy_kernels
from ddcsim.netir import conv, depthwise, output_spatial, same_pad

CASES = [
    ("regular 3x3 32->64 @32x32", same_pad(conv(32, 64, 3)), (32, 32)),
    ("regular 5x5 d=1 16->32 @24x24", same_pad(conv(16, 32, 5, dilation=1)), (24, 24)),
    ("depthwise 7x7 128 @32x32", same_pad(depthwise(128, 7)), (32, 32)),
    ("pointwise 1x1 64->128 @32x32", conv(64, 128, 1), (32, 32)),
]


def make_args(layer, spatial, rng):
    h, w = spatial
    x = rng.integers(-128, 128, (layer.ic, h, w)).astype(np.int32)
    if layer.kind.value == "depthwise":
        wts = rng.integers(-128, 128, (layer.oc, layer.ky, layer.kx)).astype(np.int32)
    else:
        wts = rng.integers(-128, 128, (layer.oc, layer.ic, layer.ky, layer.kx)).astype(np.int32)
    oh, ow = output_spatial(layer, h, w)
    out = np.zeros((layer.oc, oh, ow), dtype=np.int32)
    return x, wts, out


def run_kernel(mod, layer, x, wts, out, blocked):
    out[...] = 0
    args = (x, wts, layer.pad[0], layer.pad[2], layer.stride, layer.dilation + 1)
    dw = layer.kind.value == "depthwise"
    if blocked:
        fn = mod.conv_depthwise_blocked if dw else mod.conv_regular_blocked
        fn(*args, 8, 16, 16, out)
    else:
        fn = mod.conv_depthwise_naive if dw else mod.conv_regular_naive
        fn(*args, out)
    return out


def bench(mod, layer, x, wts, out, blocked, repeats):
    run_kernel(mod, layer, x, wts, out, blocked)  # warmup / JIT
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run_kernel(mod, layer, x, wts, out, blocked)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'case':36s} {'path':8s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}")
    for label, layer, spatial in CASES:
        x, wts, out = make_args(layer, spatial, rng)
        for blocked in (False, True):
            ref = run_kernel(_numba_kernels, layer, x, wts, out.copy(), blocked).copy()
            alt = run_kernel(_numpy_kernels, layer, x, wts, out.copy(), blocked)
            assert np.array_equal(ref, alt), "backends disagree"
            t_nb = bench(_numba_kernels, layer, x, wts, out, blocked, args.repeats)
            t_np = bench(_numpy_kernels, layer, x, wts, out, blocked, args.repeats)
            path = "blocked" if blocked else "naive"
            print(f"{label:36s} {path:8s} {t_nb * 1e3:9.3f}ms {t_np * 1e3:9.3f}ms "
                  f"{t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
