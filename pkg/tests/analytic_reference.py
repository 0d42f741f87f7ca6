"""Independent scalar evaluation of the accelerator timing equations.

Written directly from the per-block formulas, deliberately not importing any
package code, so the perfmodel implementation can be checked against it.
"""

import math


def regular_times(ic, oc, x, y, in_h, in_w, out_h, out_w, bw_fm, bw_w, pe_num, mac_pe):
    t_m = max(
        ic * math.ceil(in_h * in_w / bw_fm) * math.ceil(oc / pe_num),
        ic * oc * math.ceil(x * y / bw_w),
    )
    t_c = x * y * ic * math.ceil(out_h * out_w / mac_pe) * math.ceil(oc / pe_num)
    return t_m, t_c


def depthwise_times(oc, x, y, in_h, in_w, out_h, out_w, bw_fm, bw_w, pe_num, mac_pe):
    t_m = max(
        oc * math.ceil(in_h * in_w / bw_fm),
        oc * math.ceil(x * y / bw_w),
    )
    t_c = x * y * math.ceil(out_h * out_w / mac_pe) * math.ceil(oc / pe_num)
    return t_m, t_c
