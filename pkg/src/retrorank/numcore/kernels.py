"""Kernel backend selection.

The compiled extension is used when present; set RETRORANK_PURE_PYTHON=1
(or ship without building) to run on the numpy fallback.  Both backends
implement the contract documented in np_kernels.py.
"""

from __future__ import annotations

import os

from . import np_kernels

if os.environ.get("RETRORANK_PURE_PYTHON"):
    _impl = np_kernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = np_kernels
        BACKEND = "python"

sigmoid = _impl.sigmoid
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
conv_pool_forward = _impl.conv_pool_forward
conv_pool_backward = _impl.conv_pool_backward


def available_backends() -> dict[str, object]:
    """Name -> module for every importable backend (used by benchmarks)."""
    found: dict[str, object] = {"python": np_kernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
