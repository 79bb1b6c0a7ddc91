"""Backend selection for the batched group kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
takes over.  Setting ``HEISRECT_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from heisrect import _kernels_py

if os.environ.get("HEISRECT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from heisrect import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
        BACKEND = "python"


def backends():
    """Return the available backends as a name -> module mapping."""
    found = {"python": _kernels_py}
    try:
        from heisrect import _ckernels

        found["cython"] = _ckernels
    except ImportError:  # pragma: no cover
        pass
    return found


def _rows(a):
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1, a.shape[-1])


def mul(p, q, n, impl=None):
    impl = impl or _impl
    p, q = np.broadcast_arrays(np.asarray(p, float), np.asarray(q, float))
    shape = p.shape
    return impl.mul(_rows(p), _rows(q), n).reshape(shape)


def norm(p, n, impl=None):
    impl = impl or _impl
    p = np.asarray(p, float)
    return impl.norm(_rows(p), n).reshape(p.shape[:-1])


def dist(p, q, n, impl=None):
    impl = impl or _impl
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if p.ndim == 1 and q.ndim > 1:
        return impl.dist_one_many(np.ascontiguousarray(p), _rows(q), n).reshape(q.shape[:-1])
    p, q = np.broadcast_arrays(p, q)
    return impl.dist(_rows(p), _rows(q), n).reshape(p.shape[:-1])


def argmin_dist(z, pts, n, impl=None):
    """Index and value of the point in ``pts`` closest to ``z``; first index wins ties."""
    impl = impl or _impl
    return impl.argmin_one_many(np.ascontiguousarray(z, dtype=np.float64), _rows(np.asarray(pts, float)), n)
