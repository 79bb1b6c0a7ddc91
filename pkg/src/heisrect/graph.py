"""Intrinsic graphs over W: graph maps, translations, intrinsic gradients, regularity.

The graph map of phi is Phi(w) = w . (phi(w), 0, ..., 0).  Left translating the
graph by p^-1 gives the graph of

    phi^(p^-1)(w) = -x_1(p) + phi(pi_W(p . w)).

The intrinsic gradient collects the derivatives of phi along the vector fields
D_j = X_j (j != n+1) and D_{n+1} = d/dx_{n+1} + phi d/dt restricted to W, indexed
j = 2, ..., 2n.  Derivatives are central differences along the flow lines; the
flow of D_{n+1} is advanced by one classical Runge-Kutta step.
"""

from dataclasses import dataclass

import numpy as np

from heisrect.errors import NumericalFailure, UsageError
from heisrect.group import (
    embed_w,
    group_index,
    group_inv,
    group_mul,
    koranyi_norm,
    split,
    w_norm,
)
from heisrect.surfaces import FunctionGraph, SurfaceFn, rescale  # noqa: F401

DEFAULT_STEP = 1e-5


def _check_w(phi, w):
    w = np.asarray(w, dtype=np.float64)
    if w.shape[-1] != 2 * phi.n:
        raise UsageError(f"expected W points with {2 * phi.n} coordinates, got {w.shape[-1]}")
    return w


def graph_points(phi, w, values=None):
    """Phi(w) for a batch of W-arrays; ``values`` may pass precomputed phi(w)."""
    w = _check_w(phi, w)
    v = phi.value(w) if values is None else values
    if not np.all(np.isfinite(v)):
        raise NumericalFailure("surface produced a non-finite value")
    n = phi.n
    out = embed_w(w)
    out[..., 0] = v
    out[..., -1] -= 0.5 * w[..., n - 1] * v
    return out


@dataclass(frozen=True)
class GraphPoint:
    w: np.ndarray
    p: np.ndarray


def graph_map(phi, w):
    """Return the pair (w, Phi(w))."""
    w = _check_w(phi, w)
    return GraphPoint(w.copy(), graph_points(phi, w))


def translated_params(p, w):
    """pi_W(p . w) for W-arrays w."""
    return split(group_mul(p, embed_w(w)))[0]


def translate_fn(phi, p, w):
    """phi^(p^-1)(w) = -x_1(p) + phi(pi_W(p . w))."""
    p = np.asarray(p, dtype=np.float64)
    group_index(p)
    w = _check_w(phi, w)
    return phi.value(translated_params(p, w)) - p[..., 0]


class TranslatedSurface(SurfaceFn):
    """phi^(p^-1) as a surface in its own right: its graph is p^-1 . Phi(W)."""

    kind = "translated"

    def __init__(self, phi, p):
        self.base = phi
        self.p = np.asarray(p, dtype=np.float64)
        super().__init__(phi.n, phi.declared_alpha, phi.declared_H, phi.declared_L,
                         phi.support_radius + float(np.max(koranyi_norm(self.p))))

    def _value(self, w):
        return translate_fn(self.base, self.p, w)

    @property
    def sup_abs(self):
        return self.base.sup_abs + float(np.max(np.abs(self.p[..., 0])))


def _flow_coefficients(n, w):
    """For each direction j = 2..2n (index k = j - 2): dt/ds along X_j, or None for D_{n+1}."""
    coeffs = []
    for k in range(2 * n - 1):
        j = k + 2
        if j <= n:
            coeffs.append(-0.5 * w[..., n + j - 2])
        elif j == n + 1:
            coeffs.append(None)
        else:
            coeffs.append(0.5 * w[..., j - n - 2])
    return coeffs


def characteristic_step(phi, w, h):
    """One Runge-Kutta step of size h along D_{n+1}: y_{n+1}' = 1, t' = phi."""
    n = phi.n
    k_axis = n - 1

    def shifted(s, dt):
        q = w.copy()
        q[..., k_axis] += s
        q[..., -1] += dt
        return q

    k1 = phi.value(w)
    k2 = phi.value(shifted(0.5 * h, 0.5 * h * k1))
    k3 = phi.value(shifted(0.5 * h, 0.5 * h * k2))
    k4 = phi.value(shifted(h, h * k3))
    return shifted(h, h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0)


def intrinsic_gradient(phi, w, h=DEFAULT_STEP):
    """Central-difference intrinsic gradient (D_2 phi, ..., D_2n phi) at W-arrays w."""
    if not h > 0:
        raise UsageError("gradient step must be positive")
    w = _check_w(phi, w)
    n = phi.n
    coeffs = _flow_coefficients(n, w)
    comps = []
    for k, c in enumerate(coeffs):
        if c is None:
            fwd = phi.value(characteristic_step(phi, w, h))
            bwd = phi.value(characteristic_step(phi, w, -h))
        else:
            fwd_w = w.copy()
            bwd_w = w.copy()
            fwd_w[..., k] += h
            bwd_w[..., k] -= h
            fwd_w[..., -1] += h * c
            bwd_w[..., -1] -= h * c
            fwd = phi.value(fwd_w)
            bwd = phi.value(bwd_w)
        comps.append((fwd - bwd) / (2.0 * h))
    grad = np.stack(comps, axis=-1)
    if not np.all(np.isfinite(grad)):
        raise NumericalFailure("non-finite intrinsic gradient")
    return grad


def normal(phi, w, h=DEFAULT_STEP):
    """Horizontal unit normal (-1, grad) / sqrt(1 + |grad|^2) at Phi(w)."""
    g = intrinsic_gradient(phi, w, h)
    v = np.concatenate([-np.ones(g.shape[:-1] + (1,)), g], axis=-1)
    return v / np.sqrt(1.0 + np.sum(g * g, axis=-1))[..., None]


def cone_quotients(phi, w, wp):
    """|pi_V(Phi(w)^-1 Phi(w'))| / ||pi_W(Phi(w)^-1 Phi(w'))|| for paired samples.

    Degenerate pairs (zero W-part, nonzero V-part) give +inf.
    """
    a = graph_points(phi, w)
    b = graph_points(phi, wp)
    rel = group_mul(group_inv(a), b)
    wpart, vpart = split(rel)
    num = np.abs(vpart)
    den = w_norm(wpart)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return q


def lip_estimate(phi, samples):
    """Sup of the cone quotients over all pairs drawn from ``samples`` (shape (N, 2n))."""
    samples = _check_w(phi, samples)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise UsageError("lip_estimate needs at least two samples")
    i, j = np.triu_indices(samples.shape[0], k=1)
    keep = np.any(samples[i] != samples[j], axis=-1)
    if not np.any(keep):
        raise UsageError("lip_estimate needs two distinct samples")
    return float(np.max(cone_quotients(phi, samples[i[keep]], samples[j[keep]])))


def holder_gradient_quotients(phi, alpha, base_w, offsets, h=DEFAULT_STEP):
    """|grad(pi_W(p . w)) - grad(pi_W(p))| / ||w||^alpha with p = Phi(base_w), w = offsets."""
    if not 0 < alpha <= 1:
        raise UsageError("alpha must lie in (0, 1]")
    base_w = _check_w(phi, base_w)
    offsets = _check_w(phi, offsets)
    p = graph_points(phi, base_w)
    moved = translated_params(p, offsets)
    diff = intrinsic_gradient(phi, moved, h) - intrinsic_gradient(phi, base_w, h)
    return np.linalg.norm(diff, axis=-1) / w_norm(offsets) ** alpha


def check_holder_gradient(phi, alpha, base_w, offsets, h=DEFAULT_STEP):
    """Sampled supremum of :func:`holder_gradient_quotients`."""
    return float(np.max(holder_gradient_quotients(phi, alpha, base_w, offsets, h)))


def vertical_holder_quotients(phi, alpha, w, gaps, two_regime=False):
    """|phi(y, t) - phi(y, t + gap)| / |gap|^((1+alpha)/2).

    With ``two_regime`` the exponent becomes (1-alpha)/2 for |gap| >= 1.
    """
    if not 0 < alpha <= 1:
        raise UsageError("alpha must lie in (0, 1]")
    w = _check_w(phi, w)
    gaps = np.asarray(gaps, dtype=np.float64)
    wp = w.copy()
    wp[..., -1] = wp[..., -1] + gaps
    num = np.abs(phi.value(w) - phi.value(wp))
    expo = np.full(gaps.shape, 0.5 * (1 + alpha))
    if two_regime:
        expo = np.where(np.abs(gaps) >= 1.0, 0.5 * (1 - alpha), expo)
    return num / np.abs(gaps) ** expo


def check_vertical_holder(phi, alpha, w, gaps, two_regime=False):
    return float(np.max(vertical_holder_quotients(phi, alpha, w, gaps, two_regime)))


def linear_approx_quotients(phi, alpha, base_w, offsets, h=DEFAULT_STEP):
    """|phi^(p^-1)(y, t) - <grad phi(w), y>| and the same divided by ||(y, t)||^(1+alpha)."""
    base_w = _check_w(phi, base_w)
    offsets = _check_w(phi, offsets)
    p = graph_points(phi, base_w)
    g = intrinsic_gradient(phi, base_w, h)
    num = np.abs(translate_fn(phi, p, offsets) - np.sum(g * offsets[..., :-1], axis=-1))
    return num, num / w_norm(offsets) ** (1 + alpha)
