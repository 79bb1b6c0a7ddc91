"""Pure numpy versions of the batched group kernels.

Every function takes C-contiguous float64 arrays whose rows are points of the
Heisenberg group H^n in coordinates (x_1, ..., x_2n, t).  The compiled module
``_ckernels`` exposes the same functions with the same signatures.
"""

import numpy as np


def _omega(a, b, n):
    return np.einsum("ij,ij->i", a[:, :n], b[:, n:2 * n]) - np.einsum(
        "ij,ij->i", a[:, n:2 * n], b[:, :n]
    )


def mul(p, q, n):
    out = p + q
    out[:, 2 * n] += 0.5 * _omega(p, q, n)
    return out


def norm(p, n):
    sq = np.einsum("ij,ij->i", p[:, :2 * n], p[:, :2 * n])
    return np.sqrt(np.hypot(sq, 4.0 * p[:, 2 * n]))


def dist(p, q, n):
    dx = p[:, :2 * n] - q[:, :2 * n]
    dt = p[:, 2 * n] - q[:, 2 * n] - 0.5 * _omega(q, p, n)
    sq = np.einsum("ij,ij->i", dx, dx)
    return np.sqrt(np.hypot(sq, 4.0 * dt))


def dist_one_many(z, pts, n):
    zz = np.broadcast_to(z, pts.shape)
    return dist(np.ascontiguousarray(zz), pts, n)


def argmin_one_many(z, pts, n):
    d = dist_one_many(z, pts, n)
    k = int(np.argmin(d))
    return k, float(d[k])
