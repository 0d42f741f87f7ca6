"""JIT-compiled convolution kernels (default backend).

The naive kernels spell out the reference loop order (output channel, output
position, input channel, kernel taps).  The blocked kernels follow the
accelerator's four-level schedule: output-channel group, spatial block, then
input channel, with the group's channels updated together.  All operands are
int32; accumulation is exact.
"""

from __future__ import annotations

import numpy as np
from numba import njit

BACKEND = "numba"


@njit(cache=True)
def conv_regular_naive(inp, w, pad_t, pad_l, stride, step, out):
    ocn, oh, ow = out.shape
    icn, ih, iw = inp.shape
    kyn, kxn = w.shape[2], w.shape[3]
    for oc in range(ocn):
        for oy in range(oh):
            for ox in range(ow):
                acc = 0
                for ic in range(icn):
                    for ky in range(kyn):
                        iy = oy * stride - pad_t + ky * step
                        if iy < 0 or iy >= ih:
                            continue
                        for kx in range(kxn):
                            ix = ox * stride - pad_l + kx * step
                            if ix < 0 or ix >= iw:
                                continue
                            acc += inp[ic, iy, ix] * w[oc, ic, ky, kx]
                out[oc, oy, ox] = acc


@njit(cache=True)
def conv_depthwise_naive(inp, w, pad_t, pad_l, stride, step, out):
    ocn, oh, ow = out.shape
    ih, iw = inp.shape[1], inp.shape[2]
    kyn, kxn = w.shape[1], w.shape[2]
    for c in range(ocn):
        for oy in range(oh):
            for ox in range(ow):
                acc = 0
                for ky in range(kyn):
                    iy = oy * stride - pad_t + ky * step
                    if iy < 0 or iy >= ih:
                        continue
                    for kx in range(kxn):
                        ix = ox * stride - pad_l + kx * step
                        if ix < 0 or ix >= iw:
                            continue
                        acc += inp[c, iy, ix] * w[c, ky, kx]
                out[c, oy, ox] = acc


@njit(cache=True)
def conv_regular_blocked(inp, w, pad_t, pad_l, stride, step, pe_num, on, om, out):
    ocn, oh, ow = out.shape
    icn, ih, iw = inp.shape
    kyn, kxn = w.shape[2], w.shape[3]
    groups = -(-ocn // pe_num)
    for g in range(groups):
        oc0 = g * pe_num
        oc1 = min(oc0 + pe_num, ocn)
        for by in range(0, oh, on):
            y1 = min(by + on, oh)
            for bx in range(0, ow, om):
                x1 = min(bx + om, ow)
                for ic in range(icn):
                    for oc in range(oc0, oc1):
                        for oy in range(by, y1):
                            for ox in range(bx, x1):
                                acc = 0
                                for ky in range(kyn):
                                    iy = oy * stride - pad_t + ky * step
                                    if iy < 0 or iy >= ih:
                                        continue
                                    for kx in range(kxn):
                                        ix = ox * stride - pad_l + kx * step
                                        if ix < 0 or ix >= iw:
                                            continue
                                        acc += inp[ic, iy, ix] * w[oc, ic, ky, kx]
                                out[oc, oy, ox] += acc


@njit(cache=True)
def conv_depthwise_blocked(inp, w, pad_t, pad_l, stride, step, pe_num, on, om, out):
    ocn, oh, ow = out.shape
    ih, iw = inp.shape[1], inp.shape[2]
    kyn, kxn = w.shape[1], w.shape[2]
    groups = -(-ocn // pe_num)
    for g in range(groups):
        c0 = g * pe_num
        c1 = min(c0 + pe_num, ocn)
        for by in range(0, oh, on):
            y1 = min(by + on, oh)
            for bx in range(0, ow, om):
                x1 = min(bx + om, ow)
                for c in range(c0, c1):
                    for oy in range(by, y1):
                        for ox in range(bx, x1):
                            acc = 0
                            for ky in range(kyn):
                                iy = oy * stride - pad_t + ky * step
                                if iy < 0 or iy >= ih:
                                    continue
                                for kx in range(kxn):
                                    ix = ox * stride - pad_l + kx * step
                                    if ix < 0 or ix >= iw:
                                        continue
                                    acc += inp[c, iy, ix] * w[c, ky, kx]
                            out[c, oy, ox] = acc
