"""Brute-force oracles for shape inference and receptive fields.

Shape: enumerate every window anchor that fits inside the padded input.
Receptive field: propagate the dependency set of one output pixel backward
through the layer list and measure its extent (padding shifts coordinates
but never changes the extent).
"""


def extent(k, d):
    return k + (k - 1) * d


def anchors(in_size, kernel, pad_total, stride, dilation):
    """Number of valid output positions along one axis, by enumeration."""
    padded = in_size + pad_total
    e = extent(kernel, dilation)
    count = 0
    pos = 0
    while pos + e <= padded:
        count += 1
        pos += stride
    return count


def receptive_field_by_mask(layers):
    """layers: iterable of (kernel, dilation, stride) per spatial layer,
    ordered input-to-output.  Returns the 1-d receptive extent."""
    coords = {0}
    for kernel, dilation, stride in reversed(list(layers)):
        step = dilation + 1
        coords = {c * stride + k * step for c in coords for k in range(kernel)}
    return max(coords) - min(coords) + 1
