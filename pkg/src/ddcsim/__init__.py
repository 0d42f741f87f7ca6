"""ddcsim: performance model, pipeline simulator, workload/rewrite toolkit,
and bit-exact int8 functional reference for a dual-mode (regular + depthwise)
CNN inference accelerator."""

__version__ = "0.1.0"

from . import costmodel, funcsim, netir, perfmodel, pipesim  # noqa: F401
