"""Vertical tangent-plane correspondences in H^n, n >= 2.

For D = (a_2, ..., a_n, c, b_2, ..., b_n) the linear map
psi_D(x_2, ..., x_2n) = c x_{n+1} + sum_i (a_i x_i + b_i x_{n+i}) has the
vertical plane W' = {x_1 = psi_D} as intrinsic graph, and

    Psi_D(0, x_2, ..., x_2n, t) = (psi_D, x_2 + b_2 x_{n+1}, ..., x_n + b_n x_{n+1},
                                   x_{n+1}, x_{n+2} - a_2 x_{n+1}, ..., x_2n - a_n x_{n+1}, t)

is a group isomorphism W -> W'.  At a surface point p the oracle uses
Psi_p = Psi_D with D the intrinsic gradient at pi_W(p), rounded to a 1e-8
lattice, and Tan^w_p(v) = Psi_p(F(w^-1 v)) with F the isomorphism G -> W.
"""

import numpy as np

from heisrect import kernels
from heisrect.errors import UsageError
from heisrect.graph import graph_points, intrinsic_gradient
from heisrect.group import (
    dist,
    embed_w,
    group_mul,
    koranyi_norm,
    model_dist,
    model_embed,
    model_inv,
    model_mul,
    split,
    w_mul,
)
from heisrect.nearest import nearest_point_batch
from heisrect.oracle import CorrespondenceOracle

GRADIENT_QUANTUM = 1e-8


def _gradient_arity(D):
    D = np.asarray(D, dtype=np.float64)
    k = D.shape[-1]
    if k % 2 == 0:
        raise UsageError(f"gradient vector must have odd length 2n-1, got {k}")
    n = (k + 1) // 2
    if n < 2:
        raise UsageError("plane correspondences need n >= 2; use flag correspondences in H^1")
    return D, n


def psi_linear(D, w):
    """psi_D at W-arrays w."""
    D, n = _gradient_arity(D)
    w = np.asarray(w, dtype=np.float64)
    return np.sum(D * w[..., :2 * n - 1], axis=-1)


def psi_D(D, w):
    """Psi_D(w) as H^n points."""
    D, n = _gradient_arity(D)
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] != 2 * n:
        raise UsageError("W point and gradient vector have different arities")
    a, b = D[..., :n - 1], D[..., n:]
    pivot = w[..., n - 1:n]
    out = np.empty(np.broadcast_shapes(D.shape[:-1], w.shape[:-1]) + (2 * n + 1,))
    out[..., 0] = psi_linear(D, w)
    out[..., 1:n] = w[..., :n - 1] + b * pivot
    out[..., n] = w[..., n - 1]
    out[..., n + 1:2 * n] = w[..., n:2 * n - 1] - a * pivot
    out[..., 2 * n] = w[..., -1]
    return out


def psi_D_drift(D, Dp, w):
    """d(Psi_D(w), Psi_D'(w))."""
    return dist(psi_D(D, w), psi_D(Dp, w))


def psi_D_distortion(D, count=2000, seed=0):
    """(c_D, C_D): extremes of ||Psi_D(v)|| over sampled unit-norm v in W."""
    D, n = _gradient_arity(D)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(count, 2 * n))
    v /= koranyi_norm(embed_w(v))[:, None] ** np.r_[np.ones(2 * n - 1), 2.0][None, :]
    r = koranyi_norm(psi_D(D, v))
    return float(np.min(r)), float(np.max(r))


def plane_lift(D, w):
    """L_p(y, t) = (0, y, t) . (<D, y>, 0, ..., 0), the tangent-plane point over (y, t)."""
    D, n = _gradient_arity(D)
    w = np.asarray(w, dtype=np.float64)
    h = np.zeros(w.shape[:-1] + (2 * n + 1,))
    h[..., 0] = psi_linear(D, w)
    return group_mul(embed_w(w), h)


def quantize_gradient(D):
    return np.round(np.asarray(D, dtype=np.float64) / GRADIENT_QUANTUM) * GRADIENT_QUANTUM


def base_gradient(phi, p, h=None):
    """Quantized intrinsic gradient at pi_W(p)."""
    w = split(p)[0]
    g = intrinsic_gradient(phi, w) if h is None else intrinsic_gradient(phi, w, h)
    return quantize_gradient(g)


def tan_map(D, w, v):
    """Tan^w_p(v) = Psi_p(F(w^-1 v)) for the gradient D of Psi_p."""
    return psi_D(D, model_embed(model_mul(model_inv(w), v)))


def plane_approx_error(phi, p, w, tol=1e-12, gradient=None):
    """dist(p . L_p(w), S) for offsets w (W-arrays), and ||L_p(w)|| for the side check."""
    p = np.asarray(p, dtype=np.float64)
    D = base_gradient(phi, p) if gradient is None else gradient
    lift = plane_lift(D, w)
    q = group_mul(p, lift)
    _, d = nearest_point_batch(phi, q.reshape(-1, q.shape[-1]), tol)
    return d.reshape(q.shape[:-1]), koranyi_norm(lift)


def gradient_holder_pairs(phi, w, wp, alpha):
    """|grad(w) - grad(w')| / d(Phi(w), Phi(w'))^alpha on paired samples."""
    g1 = intrinsic_gradient(phi, w)
    g2 = intrinsic_gradient(phi, wp)
    d = dist(graph_points(phi, w), graph_points(phi, wp))
    return np.linalg.norm(g1 - g2, axis=-1) / d ** alpha


class PlaneOracle(CorrespondenceOracle):
    """i_{w -> p}(v): nearest surface point to p . Tan^w_p(v)."""

    kind = "plane"

    def __init__(self, phi, tol=1e-9, declared_L=None, declared_A=None):
        if phi.n < 2:
            raise UsageError("plane correspondences need n >= 2; use flag correspondences in H^1")
        super().__init__(
            phi, tol,
            2.0 * (1.0 + phi.declared_L) ** 2 if declared_L is None else declared_L,
            4.0 * phi.declared_H if declared_A is None else declared_A,
            phi.declared_alpha,
        )
        self._cache = {}

    def gradients(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=np.float64))
        keys = [row.tobytes() for row in p]
        missing = {k: row for k, row in zip(keys, p) if k not in self._cache}
        if missing:
            rows = np.array(list(missing.values()))
            for k, g in zip(missing, base_gradient(self.phi, rows)):
                self._cache[k] = g
        return np.array([self._cache[k] for k in keys])

    def model_map(self, p, u):
        return psi_D(self.gradients(p), model_embed(u))


def make_plane_oracle(phi, tol=1e-9):
    return PlaneOracle(phi, tol)


def chain_rule_residual(D, w1, w2, w3):
    """max |Tan^w1(w3) - Tan^w1(w2) . Tan^w2(w3)| componentwise."""
    a = tan_map(D, w1, w3)
    b = group_mul(tan_map(D, w1, w2), tan_map(D, w2, w3))
    return float(np.max(np.abs(a - b)))


def homomorphism_residual(D, w, wp):
    """max |Psi_D(w w') - Psi_D(w) Psi_D(w')| componentwise."""
    a = psi_D(D, w_mul(w, wp))
    b = group_mul(psi_D(D, w), psi_D(D, wp))
    return float(np.max(np.abs(a - b)))


def tan_distortion(D, samples):
    """(min, max) of d(Tan(v_i), Tan(v_j)) / d_G(v_i, v_j) with base point 0."""
    samples = np.asarray(samples, dtype=np.float64)
    img = psi_D(D, model_embed(samples))
    i, j = np.triu_indices(samples.shape[0], k=1)
    dg = model_dist(samples[i], samples[j])
    keep = dg > 0
    r = kernels.dist(img[i[keep]], img[j[keep]], samples.shape[-1] // 2) / dg[keep]
    return float(np.min(r)), float(np.max(r))
