"""Kernel selection.

The compiled ``_kernels`` extension is preferred; the numpy fallback in
``_pykernels`` is used when the extension is not built or when
``GRAPHREG_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""

import os

import numpy as np

from . import _pykernels

_force_python = os.environ.get("GRAPHREG_PURE_PYTHON", "") not in ("", "0")

_compiled = None
if not _force_python:
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

_impl = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"
METRIC_CODES = _pykernels.METRIC_CODES


def compiled_available():
    return _compiled is not None


def jacobi_sweep(indptr, indices, weights, prev, base_num, base_den, nbr_scale, out, impl=None):
    k = impl or _impl
    return k.jacobi_sweep(
        np.ascontiguousarray(indptr, dtype=np.int32),
        np.ascontiguousarray(indices, dtype=np.int32),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(prev, dtype=np.float64),
        np.ascontiguousarray(base_num, dtype=np.float64),
        np.ascontiguousarray(base_den, dtype=np.float64),
        float(nbr_scale),
        out,
    )


def neighborhood_order(n_nodes, eu, ev, perm, batch_size, impl=None):
    k = impl or _impl
    return k.neighborhood_order(
        int(n_nodes),
        np.ascontiguousarray(eu, dtype=np.int64),
        np.ascontiguousarray(ev, dtype=np.int64),
        np.ascontiguousarray(perm, dtype=np.int64),
        int(batch_size),
    )


def edge_distance(H, a, b, coef, metric, impl=None):
    k = impl or _impl
    code = METRIC_CODES[metric] if isinstance(metric, str) else int(metric)
    return k.edge_distance(
        np.ascontiguousarray(H, dtype=np.float64),
        np.ascontiguousarray(a, dtype=np.int64),
        np.ascontiguousarray(b, dtype=np.int64),
        np.ascontiguousarray(coef, dtype=np.float64),
        code,
    )
