"""Elementwise kernels for the time stepper: compiled core with fallback.

The Cython extension is selected at import time when available; set
ZK2D_PURE_PYTHON=1 to force the numpy implementation.  Both expose the
same functions (see :mod:`zk2d._kernels.fallback` for the contract).
"""

import os

if os.environ.get("ZK2D_PURE_PYTHON"):
    from zk2d._kernels import fallback as impl

    COMPILED = False
else:
    try:
        from zk2d._kernels import _stage_ops as impl  # type: ignore[no-redef]

        COMPILED = True
    except ImportError:
        from zk2d._kernels import fallback as impl

        COMPILED = False

fused_axpby = impl.fused_axpby
fused_stage_c = impl.fused_stage_c
fused_final = impl.fused_final
fused_nonlinear = impl.fused_nonlinear
ipow = impl.ipow


def implementation_name() -> str:
    return "compiled" if COMPILED else "numpy-fallback"
