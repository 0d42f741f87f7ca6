"""Pure-numpy convolution kernels (fallback backend).

Same contracts as the numba kernels: int32 inputs/weights/accumulators,
zero padding, dilation expressed as the step between taps (d + 1).  Integer
accumulation is exact, so the vectorized tap order gives results identical
to the loop kernels.
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def _padded(inp: np.ndarray, pad_t: int, pad_l: int, oh: int, ow: int,
            stride: int, step: int, kyn: int, kxn: int) -> np.ndarray:
    icn, ih, iw = inp.shape
    need_h = (oh - 1) * stride + (kyn - 1) * step + 1
    need_w = (ow - 1) * stride + (kxn - 1) * step + 1
    pb = max(0, need_h - pad_t - ih)
    pr = max(0, need_w - pad_l - iw)
    out = np.zeros((icn, pad_t + ih + pb, pad_l + iw + pr), dtype=np.int32)
    out[:, pad_t:pad_t + ih, pad_l:pad_l + iw] = inp
    return out


def _tap_slice(xp: np.ndarray, ky: int, kx: int, stride: int, step: int,
               y0: int, y1: int, x0: int, x1: int) -> np.ndarray:
    ys = y0 * stride + ky * step
    xs = x0 * stride + kx * step
    ye = ys + (y1 - y0 - 1) * stride + 1
    xe = xs + (x1 - x0 - 1) * stride + 1
    return xp[:, ys:ye:stride, xs:xe:stride]


def conv_regular_naive(inp: np.ndarray, w: np.ndarray, pad_t: int, pad_l: int,
                       stride: int, step: int, out: np.ndarray) -> None:
    ocn, oh, ow = out.shape
    kyn, kxn = w.shape[2], w.shape[3]
    xp = _padded(inp, pad_t, pad_l, oh, ow, stride, step, kyn, kxn)
    acc = np.zeros((ocn, oh, ow), dtype=np.int32)
    for ky in range(kyn):
        for kx in range(kxn):
            sl = _tap_slice(xp, ky, kx, stride, step, 0, oh, 0, ow)
            acc += np.einsum("ihw,oi->ohw", sl, w[:, :, ky, kx])
    out[...] = acc


def conv_depthwise_naive(inp: np.ndarray, w: np.ndarray, pad_t: int, pad_l: int,
                         stride: int, step: int, out: np.ndarray) -> None:
    ocn, oh, ow = out.shape
    kyn, kxn = w.shape[1], w.shape[2]
    xp = _padded(inp, pad_t, pad_l, oh, ow, stride, step, kyn, kxn)
    acc = np.zeros((ocn, oh, ow), dtype=np.int32)
    for ky in range(kyn):
        for kx in range(kxn):
            sl = _tap_slice(xp, ky, kx, stride, step, 0, oh, 0, ow)
            acc += sl * w[:, ky, kx][:, None, None]
    out[...] = acc


def conv_regular_blocked(inp: np.ndarray, w: np.ndarray, pad_t: int, pad_l: int,
                         stride: int, step: int, pe_num: int, on: int, om: int,
                         out: np.ndarray) -> None:
    ocn, oh, ow = out.shape
    icn = inp.shape[0]
    kyn, kxn = w.shape[2], w.shape[3]
    xp = _padded(inp, pad_t, pad_l, oh, ow, stride, step, kyn, kxn)
    groups = -(-ocn // pe_num)
    for g in range(groups):
        oc0, oc1 = g * pe_num, min((g + 1) * pe_num, ocn)
        for by in range(0, oh, on):
            y1 = min(by + on, oh)
            for bx in range(0, ow, om):
                x1 = min(bx + om, ow)
                for ic in range(icn):
                    block = np.zeros((oc1 - oc0, y1 - by, x1 - bx), dtype=np.int32)
                    for ky in range(kyn):
                        for kx in range(kxn):
                            sl = _tap_slice(xp[ic:ic + 1], ky, kx, stride, step, by, y1, bx, x1)
                            block += w[oc0:oc1, ic, ky, kx][:, None, None] * sl[0]
                    out[oc0:oc1, by:y1, bx:x1] += block


def conv_depthwise_blocked(inp: np.ndarray, w: np.ndarray, pad_t: int, pad_l: int,
                           stride: int, step: int, pe_num: int, on: int, om: int,
                           out: np.ndarray) -> None:
    ocn, oh, ow = out.shape
    kyn, kxn = w.shape[1], w.shape[2]
    xp = _padded(inp, pad_t, pad_l, oh, ow, stride, step, kyn, kxn)
    groups = -(-ocn // pe_num)
    for g in range(groups):
        c0, c1 = g * pe_num, min((g + 1) * pe_num, ocn)
        for by in range(0, oh, on):
            y1 = min(by + on, oh)
            for bx in range(0, ow, om):
                x1 = min(bx + om, ow)
                block = np.zeros((c1 - c0, y1 - by, x1 - bx), dtype=np.int32)
                for ky in range(kyn):
                    for kx in range(kxn):
                        sl = _tap_slice(xp[c0:c1], ky, kx, stride, step, by, y1, bx, x1)
                        block += w[c0:c1, ky, kx][:, None, None] * sl
                out[c0:c1, by:y1, bx:x1] = block
