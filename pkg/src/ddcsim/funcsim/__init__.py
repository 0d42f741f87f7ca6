"""Bit-exact 8-bit functional reference for the accelerator's two modes."""

from ._backend import active_backend
from .conv import conv_blocked, conv_oracle, max_pool, run_network
from .quant import (
    QuantTensor,
    QuantWeights,
    read_tensor,
    read_weights,
    relu_quantize,
    relu_quantize_scalar,
    write_tensor,
    write_weights,
)

__all__ = [
    "QuantTensor",
    "QuantWeights",
    "active_backend",
    "conv_blocked",
    "conv_oracle",
    "max_pool",
    "read_tensor",
    "read_weights",
    "relu_quantize",
    "relu_quantize_scalar",
    "run_network",
    "write_tensor",
    "write_weights",
]
