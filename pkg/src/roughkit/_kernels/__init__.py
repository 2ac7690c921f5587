"""Kernel dispatch: compiled extension when available, NumPy otherwise.

Set ROUGHKIT_PURE_PYTHON=1 to force the NumPy path.  Both backends follow
the same accumulation order, so results are bit-identical.
"""

import os

import numpy as np

from . import _pyref

if os.environ.get("ROUGHKIT_PURE_PYTHON", "") == "1":
    _impl = _pyref
    IMPLEMENTATION = "python"
else:
    try:
        from . import _native as _impl
        IMPLEMENTATION = "native"
    except ImportError:
        _impl = _pyref
        IMPLEMENTATION = "python"

level_offsets = _pyref.level_offsets


def _c64(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise ValueError("expected %d-d array, got %d-d" % (ndim, a.ndim))
    return a


def pvar_cumulative(dist_pow):
    return _impl.pvar_cumulative(_c64(dist_pow, 2))


def sig_trajectory(increments, depth):
    return _impl.sig_trajectory(_c64(increments, 2), int(depth))


def sig_trajectory_batch(increments, depth):
    return _impl.sig_trajectory_batch(_c64(increments, 3), int(depth))


def chen_max_residual(z1, z2):
    return _impl.chen_max_residual(_c64(z1, 2), _c64(z2, 3))
