"""Backend selection for the recurrence kernel.

The GRU scan is the one genuinely loop-bound inner kernel in the pipeline
(convolutions and attention reduce to BLAS matmuls already).  A compiled
Cython implementation is preferred when the extension built; the pure numpy
twin is always available.  Set MOVETONE_KERNEL=numpy|cython to force one.
"""

import os

from movetone._kernels import gru_numpy

_FORCED = os.environ.get("MOVETONE_KERNEL", "").strip().lower()

try:
    from movetone._kernels import _gru_cy
except ImportError:
    _gru_cy = None

if _FORCED == "numpy":
    _impl = gru_numpy
elif _FORCED == "cython":
    if _gru_cy is None:
        raise ImportError("MOVETONE_KERNEL=cython but the compiled kernel is not built")
    _impl = _gru_cy
else:
    _impl = _gru_cy if _gru_cy is not None else gru_numpy

BACKEND = "cython" if _impl is _gru_cy else "numpy"

gru_sequence_forward = _impl.gru_sequence_forward
gru_sequence_backward = _impl.gru_sequence_backward


def available_backends():
    """Mapping of backend name to its module, for tests and benchmarks."""
    out = {"numpy": gru_numpy}
    if _gru_cy is not None:
        out["cython"] = _gru_cy
    return out
