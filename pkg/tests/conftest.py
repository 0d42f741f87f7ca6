import io
import sys

import numpy as np
import pytest

from ddcsim.netir import LayerKind
from ddcsim.funcsim import QuantTensor, QuantWeights


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_tensor(rng, c, h, w, lo=-64, hi=64, exponent=-7):
    return QuantTensor.from_array(rng.integers(lo, hi, (c, h, w), dtype=np.int8), exponent)


def random_weights(rng, layer, lo=-64, hi=64, exponent=-7):
    if layer.kind is LayerKind.DEPTHWISE:
        data = rng.integers(lo, hi, (layer.oc, layer.ky, layer.kx), dtype=np.int8)
        return QuantWeights(LayerKind.DEPTHWISE, data, exponent)
    data = rng.integers(lo, hi, (layer.oc, layer.ic, layer.ky, layer.kx), dtype=np.int8)
    return QuantWeights(LayerKind.REGULAR, data, exponent)


def run_cli(argv):
    """Invoke the CLI in-process; returns (exit_code, stdout, stderr)."""
    from ddcsim.cli import main

    out, err = io.StringIO(), io.StringIO()
    old = sys.stdout, sys.stderr
    sys.stdout, sys.stderr = out, err
    try:
        code = main(argv)
    finally:
        sys.stdout, sys.stderr = old
    return code, out.getvalue(), err.getvalue()
