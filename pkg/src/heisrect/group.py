"""Arithmetic in the Heisenberg group H^n and in the model groups.

Points of H^n are arrays whose last axis holds (x_1, ..., x_2n, t).  All
operations broadcast over leading axes.  The group product is

    (x, t) . (x', t') = (x + x', t + t' + omega(x, x') / 2),

with the symplectic form omega(x, x') = sum_i x_i x'_{n+i} - x_{n+i} x'_i,
and the Koranyi norm is ||(x, t)|| = (|x|^4 + 16 t^2)^(1/4).  Distances are
left invariant: d(p, q) = ||q^-1 . p||.

Points of the vertical subgroup W = {x_1 = 0} are stored without the
vanishing first coordinate, i.e. as (x_2, ..., x_2n, t), so a W-array has
length 2n.  The model group G has the same length 2n:

* n = 1: the parabolic plane, pairs (y, t) with addition and the norm
  (y^4 + 16 t^2)^(1/4);
* n >= 2: H^{n-1} x R, stored as (z_1, ..., z_{2n-2}, t, s).

``model_embed`` is the isometric isomorphism G -> W.
"""

from dataclasses import dataclass

import numpy as np

from heisrect import kernels
from heisrect.errors import UsageError


def _arr(p):
    return np.asarray(p, dtype=np.float64)


def group_index(p):
    """Return n for an array of H^n points (last axis of length 2n+1)."""
    d = np.shape(p)[-1]
    if d < 3 or d % 2 == 0:
        raise UsageError(f"not a Heisenberg point: last axis has length {d}")
    return (d - 1) // 2


def _same_n(p, q):
    n = group_index(p)
    if np.shape(q)[-1] != np.shape(p)[-1]:
        raise UsageError(
            f"arity mismatch: H^{n} point combined with a point of length {np.shape(q)[-1]}"
        )
    return n


def _w_index(w):
    d = np.shape(w)[-1]
    if d < 2 or d % 2:
        raise UsageError(f"not a W or G point: last axis has length {d}")
    return d // 2


def omega(x, xp):
    """Symplectic form sum_i x_i xp_{n+i} - x_{n+i} xp_i on horizontal vectors."""
    x = _arr(x)
    xp = _arr(xp)
    n = x.shape[-1] // 2
    return np.sum(x[..., :n] * xp[..., n:2 * n] - x[..., n:2 * n] * xp[..., :n], axis=-1)


def origin(n):
    return np.zeros(2 * n + 1)


def group_mul(p, q):
    """Group product p . q."""
    n = _same_n(p, q)
    return kernels.mul(_arr(p), _arr(q), n)


def group_inv(p):
    """Inverse (-x, -t)."""
    group_index(p)
    return -_arr(p)


def koranyi_norm(p):
    n = group_index(p)
    return kernels.norm(_arr(p), n)


def dist(p, q):
    """Koranyi distance ||q^-1 . p||."""
    n = _same_n(p, q)
    return kernels.dist(_arr(p), _arr(q), n)


def dilate(p, r):
    """Heisenberg dilation (x, t) -> (r x, r^2 t)."""
    if not r > 0:
        raise UsageError(f"dilation factor must be positive, got {r}")
    p = _arr(p)
    group_index(p)
    out = r * p
    out[..., -1] *= r
    return out


def embed_w(w):
    """W-array (x_2, ..., x_2n, t) -> H^n point with x_1 = 0."""
    w = _arr(w)
    _w_index(w)
    return np.concatenate([np.zeros(w.shape[:-1] + (1,)), w], axis=-1)


def horizontal_point(x1, n):
    """The point (x1, 0, ..., 0) of the horizontal line V."""
    x1 = _arr(x1)
    out = np.zeros(x1.shape + (2 * n + 1,))
    out[..., 0] = x1
    return out


def split(p):
    """Return (pi_W(p) as a W-array, pi_V(p) as the scalar x_1).

    pi_W(p) = (0, x_2, ..., x_2n, t + x_1 x_{n+1} / 2), so that
    p = pi_W(p) . (x_1, 0, ..., 0).
    """
    p = _arr(p)
    n = group_index(p)
    w = p[..., 1:].copy()
    w[..., -1] += 0.5 * p[..., 0] * p[..., n]
    return w, p[..., 0].copy()


def project_w(p):
    return split(p)[0]


def w_mul(w, wp):
    """Product inside W, in W-array coordinates."""
    return group_mul(embed_w(w), embed_w(wp))[..., 1:]


def w_norm(w):
    return koranyi_norm(embed_w(w))


def dilate_w(w, r):
    return dilate(embed_w(w), r)[..., 1:]


# ---------------------------------------------------------------- model group


def _model_parts(g):
    g = _arr(g)
    n = _w_index(g)
    return g, n


def model_mul(g, h):
    """Product in G: addition in the parabolic plane, the H^{n-1} x R law otherwise."""
    g, n = _model_parts(g)
    h = _arr(h)
    if h.shape[-1] != g.shape[-1]:
        raise UsageError("arity mismatch between model group points")
    out = g + h
    if n >= 2:
        m = n - 1
        z, zp = g[..., :2 * m], h[..., :2 * m]
        out[..., 2 * m] += 0.5 * omega(z, zp)
    return out


def model_inv(g):
    g, _ = _model_parts(g)
    return -g


def model_norm(g):
    g, n = _model_parts(g)
    if n == 1:
        return np.sqrt(np.hypot(g[..., 0] ** 2, 4.0 * g[..., 1]))
    m = n - 1
    sq = np.sum(g[..., :2 * m] ** 2, axis=-1) + g[..., 2 * m + 1] ** 2
    return np.sqrt(np.hypot(sq, 4.0 * g[..., 2 * m]))


def model_dist(g, h):
    """d_G(g, h) = ||h^-1 . g||."""
    return model_norm(model_mul(model_inv(h), g))


def model_dilate(g, r):
    if not r > 0:
        raise UsageError(f"dilation factor must be positive, got {r}")
    g, n = _model_parts(g)
    out = r * g
    t_axis = 1 if n == 1 else 2 * n - 2
    out[..., t_axis] *= r
    return out


def model_vertical_axis(n):
    """Index of the vertical coordinate of a G-array."""
    return 1 if n == 1 else 2 * n - 2


def model_embed(g):
    """Isometric isomorphism G -> W, returned as a W-array.

    ((z_1, ..., z_{2n-2}, t), s) -> (0, z_1, ..., z_{n-1}, s, z_n, ..., z_{2n-2}, t);
    for n = 1 it is (y, t) -> (0, y, t).
    """
    g, n = _model_parts(g)
    if n == 1:
        return g.copy()
    m = n - 1
    z, t, s = g[..., :2 * m], g[..., 2 * m], g[..., 2 * m + 1]
    return np.concatenate(
        [z[..., :m], s[..., None], z[..., m:], t[..., None]], axis=-1
    )


def model_unembed(w):
    """Inverse of :func:`model_embed`."""
    w = _arr(w)
    n = _w_index(w)
    if n == 1:
        return w.copy()
    m = n - 1
    return np.concatenate(
        [w[..., :m], w[..., m + 1:2 * m + 1], w[..., 2 * m + 1:2 * m + 2], w[..., m:m + 1]],
        axis=-1,
    )


# ---------------------------------------------------------------- value types


@dataclass(frozen=True)
class HPoint:
    """A point (x, t) of H^n; ``np.asarray`` turns it into a coordinate array."""

    x: tuple
    t: float

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if len(x) == 0 or len(x) % 2 or not np.all(np.isfinite(x + (float(self.t),))):
            raise UsageError("HPoint needs an even, nonzero number of finite horizontal coordinates")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self):
        return len(self.x) // 2

    def __array__(self, dtype=None, copy=None):
        return np.array(self.x + (self.t,), dtype=dtype or np.float64)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(tuple(a[:-1]), a[-1])

    def __mul__(self, other):
        return HPoint.from_array(group_mul(self, other))

    def inv(self):
        return HPoint.from_array(group_inv(self))


@dataclass(frozen=True)
class WPoint:
    """A point (0, y, t) of the vertical subgroup W, with y = (x_2, ..., x_2n)."""

    y: tuple
    t: float

    def __post_init__(self):
        y = tuple(float(v) for v in self.y)
        if len(y) % 2 == 0 or not np.all(np.isfinite(y + (float(self.t),))):
            raise UsageError("WPoint needs an odd number of finite coordinates y")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self):
        return (len(self.y) + 1) // 2

    def __array__(self, dtype=None, copy=None):
        return np.array(self.y + (self.t,), dtype=dtype or np.float64)

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(tuple(a[:-1]), a[-1])

    def to_hpoint(self):
        return HPoint.from_array(embed_w(self))


@dataclass(frozen=True)
class GPoint:
    """A point of the model group, stored flat (see the module docstring)."""

    coords: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.coords)
        if len(c) < 2 or len(c) % 2 or not np.all(np.isfinite(c)):
            raise UsageError("GPoint needs an even number (>= 2) of finite coordinates")
        object.__setattr__(self, "coords", c)

    @property
    def n(self):
        return len(self.coords) // 2

    def __array__(self, dtype=None, copy=None):
        return np.array(self.coords, dtype=dtype or np.float64)
