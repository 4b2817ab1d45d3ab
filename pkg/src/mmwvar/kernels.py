"""Kernel backend selection.

The compiled extension is used when it was built; setting
``MMWVAR_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("MMWVAR_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"


def weibull_mstep(logy, w, k0, lo=0.05, hi=100.0, tol=1e-10):
    """Weighted Weibull MLE on log-data: ``(shape, scale, clamped, n_eval)``."""
    logy = np.ascontiguousarray(logy, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    k, scale, clamped, n_eval = _impl.weibull_mstep(logy, w, float(k0), float(lo), float(hi), float(tol))
    return float(k), float(scale), bool(clamped), int(n_eval)


def estep(logy, log_weights, scales, shapes):
    return _impl.estep(
        np.ascontiguousarray(logy, dtype=np.float64),
        np.ascontiguousarray(log_weights, dtype=np.float64),
        np.ascontiguousarray(scales, dtype=np.float64),
        np.ascontiguousarray(shapes, dtype=np.float64),
    )
