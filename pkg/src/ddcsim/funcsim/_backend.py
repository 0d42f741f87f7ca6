"""Kernel backend selection.

DDCSIM_BACKEND=numba forces the JIT kernels, =numpy forces the vectorized
fallback, =auto (default) prefers numba and falls back when it cannot be
imported.  Both backends are bit-identical; the choice only affects speed.
"""

from __future__ import annotations

import os

_choice = os.environ.get("DDCSIM_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"DDCSIM_BACKEND must be auto, numba, or numpy, got {_choice!r}")

if _choice == "numpy":
    from . import _numpy_kernels as kernels
else:
    try:
        from . import _numba_kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        if _choice == "numba":
            raise
        from . import _numpy_kernels as kernels  # type: ignore[no-redef]


def active_backend() -> str:
    return kernels.BACKEND
