"""Nearest-point projection onto parametrized sets in H^n.

The search runs over a coordinate box of W-parameters: a coarse grid (33 points
per axis, fewer when that exceeds 30000 points per query) followed by dyadic
refinement around the best grid point, with at most 20 refinement levels.  Each
level searches +-1 cell of the previous grid with 9 points per axis (spacing
divided by 4), or 5 points per axis (spacing halved) when 9 per axis would
exceed the point budget.  Ties go to the lexicographically smallest parameter
of the grid being searched.

For an intrinsic graph the search runs in sheared coordinates u around
pi_W(z): the horizontal parameters are offset by u_h and the vertical one by
u_t + shear(z, u_h), where the shear removes the twist of the product with z.
If some graph point lies within distance r of z, every minimizer has
|u_h| <= r componentwise and |u_t| <= 0.75 r^2, so the box is certified.
"""

import numpy as np

from heisrect import kernels
from heisrect.errors import NumericalFailure, UsageError
from heisrect.graph import graph_points
from heisrect.group import group_index, split

COARSE_POINTS = 33
FINE_POINTS = 9
MAX_LEVELS = 20
GRID_BUDGET = 2_000_000
COARSE_BUDGET = 30_000
FINE_BUDGET = 100_000
# a query also counts as converged once its best distance has improved by at
# most tol/8 on STALL_LEVELS consecutive levels (non-Lipschitz minimizers)
STALL_LEVELS = 3
MIN_LEVELS = 6


def coarse_points_per_axis(dim, coarse=COARSE_POINTS, budget=COARSE_BUDGET):
    """33 per axis unless the full grid would exceed the per-query point budget."""
    c = coarse
    while c > 3 and c ** dim > budget:
        c -= 2
    return c


def certified_half_widths(z, radius):
    """Half-widths of the sheared parameter box around pi_W(z) that holds all minimizers."""
    z = np.asarray(z, dtype=np.float64)
    n = group_index(z)
    r = np.asarray(radius, dtype=np.float64)
    half = np.repeat(r[..., None], 2 * n, axis=-1)
    half[..., -1] = 0.75 * r * r
    return half


def shear(z, u):
    """Vertical parameter shift x_1(z) u_{n+1} + (1/2) sum_{i>=2} (z_i u_{n+i} - u_i z_{n+i}).

    ``u`` holds sheared offsets (W-array layout); rows of z and u correspond.
    """
    n = group_index(z)
    out = z[..., 0] * u[..., n - 1]
    for i in range(2, n + 1):
        out = out + 0.5 * (z[..., i - 1] * u[..., n + i - 2] - u[..., i - 2] * z[..., n + i - 1])
    return out


def unshear(z, center, u):
    """W parameters for sheared offsets u around ``center``."""
    w = center + u
    w[..., -1] = w[..., -1] + shear(z, u)
    return w


def _unit_grid(dim, count):
    axis = np.linspace(-1.0, 1.0, count)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def grid_search(param_map, z, center, half, tol, coarse=COARSE_POINTS, levels=MAX_LEVELS,
                fine=FINE_POINTS):
    """Minimize d(z_k, param_map(w)) over boxes center_k +- half_k, for each query k.

    ``param_map(params, qidx)`` maps parameter rows to H^n points; ``qidx`` gives
    the query each row belongs to.  Returns (best parameters, best distances).
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    center = np.atleast_2d(np.asarray(center, dtype=np.float64))
    half = np.atleast_2d(np.asarray(half, dtype=np.float64))
    if not tol > 0:
        raise UsageError("nearest-point tolerance must be positive")
    if np.any(half < 0):
        raise UsageError("search window must be positive")
    n = group_index(z)
    nq, dim = center.shape
    count = coarse_points_per_axis(dim, coarse)
    unit = _unit_grid(dim, count)
    chunk = max(1, GRID_BUDGET // unit.shape[0])

    best_w = np.empty_like(center)
    best_d = np.empty(nq)
    for lo in range(0, nq, chunk):
        sl = slice(lo, min(nq, lo + chunk))
        best_w[sl], best_d[sl] = _search_level(param_map, z[sl], center[sl], half[sl], unit,
                                               np.arange(sl.start, sl.stop), n)
    spacing = 2.0 * half / (count - 1)
    if fine ** dim > FINE_BUDGET:
        fine = 5
    fine_unit = _unit_grid(dim, fine)
    scale = 0.5 * (fine - 1)
    active = np.ones(nq, dtype=bool)
    stalled = np.zeros(nq, dtype=int)
    for level in range(levels):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        span = spacing[idx]
        w_new, d_new, spread = _search_level(
            param_map, z[idx], best_w[idx], span, fine_unit, idx, n, with_spread=True
        )
        gain = best_d[idx] - d_new
        stalled[idx] = np.where(gain <= 0.125 * tol, stalled[idx] + 1, 0)
        best_w[idx] = w_new
        best_d[idx] = d_new
        spacing[idx] = span / scale
        frozen = np.all(best_w[idx] + spacing[idx] == best_w[idx], axis=-1)
        settled = (stalled[idx] >= STALL_LEVELS) & (level >= MIN_LEVELS)
        active[idx] = ~((spread <= 0.25 * tol) | frozen | settled)
    if np.any(active):
        raise NumericalFailure(
            f"nearest-point search did not reach tolerance {tol} within {levels} refinement levels"
        )
    return best_w, best_d


def _search_level(param_map, z, center, half, unit, qidx, n, with_spread=False):
    nq, g = center.shape[0], unit.shape[0]
    params = center[:, None, :] + half[:, None, :] * unit[None, :, :]
    flat = params.reshape(nq * g, -1)
    pts = param_map(flat, np.repeat(qidx, g))
    if not np.all(np.isfinite(pts)):
        raise NumericalFailure("non-finite point during nearest-point search")
    d = kernels.dist(np.repeat(z, g, axis=0), pts, n).reshape(nq, g)
    k = np.argmin(d, axis=1)
    rows = np.arange(nq)
    out_w = params[rows, k]
    out_d = d[rows, k]
    if with_spread:
        return out_w, out_d, d.max(axis=1) - out_d
    return out_w, out_d


def graph_param_map(phi):
    return lambda params, qidx: graph_points(phi, params)


def sheared_graph_map(phi, z, center):
    """param_map over sheared offsets around ``center`` (one row per query)."""
    return lambda u, qidx: graph_points(phi, unshear(z[qidx], center[qidx], u))


def nearest_point_batch(phi, z, tol, radius=None):
    """Nearest graph points to each row of z.  Returns (parameters, distances)."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if group_index(z) != phi.n:
        raise UsageError("query points and surface live in different groups")
    center = split(z)[0]
    if radius is None:
        d0 = kernels.dist(z, graph_points(phi, center), phi.n)
        radius = 1.05 * d0 + tol
    radius = np.broadcast_to(np.asarray(radius, dtype=np.float64), (z.shape[0],))
    if np.any(radius <= 0):
        raise UsageError("search window must be positive")
    half = certified_half_widths(z, radius)
    u, d = grid_search(sheared_graph_map(phi, z, center), z, np.zeros_like(center), half, tol)
    return unshear(z, center, u), d


def nearest_point(phi, z, seed_w=None, window=None, tol=1e-9):
    """Return (w, distance) minimizing d(z, Phi(w)).

    Without an explicit ``window`` the search radius is the distance from z to
    Phi(seed_w) (or to Phi(pi_W(z)) when no seed is given), slightly enlarged.
    """
    z = np.asarray(z, dtype=np.float64)
    if window is None and seed_w is not None:
        window = 1.05 * float(kernels.dist(z, graph_points(phi, seed_w), phi.n)) + tol
    if window is not None and not window > 0:
        raise UsageError("search window must be positive")
    w, d = nearest_point_batch(phi, z[None, :], tol, radius=window)
    return w[0], float(d[0])


def brute_force_nearest(phi, z, half, step, vertical_step=None):
    """Exhaustive search over a grid of sheared offsets u in the box +- half around pi_W(z).

    Horizontal spacing is ``step``; the vertical spacing defaults to step^2 so
    the grid is a step-net for the homogeneous metric.  Returns (w, distance).
    """
    z = np.asarray(z, dtype=np.float64)
    center = split(z)[0]
    steps = np.full(center.shape, float(step))
    steps[-1] = step * step if vertical_step is None else vertical_step
    axes = [np.arange(-np.floor(h / s), np.floor(h / s) + 1) * s
            for h, s in zip(np.broadcast_to(half, center.shape), steps)]
    mesh = np.meshgrid(*axes, indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=-1)
    best_k, best_d = None, np.inf
    chunk = GRID_BUDGET
    for lo in range(0, u.shape[0], chunk):
        block = unshear(np.broadcast_to(z, (min(chunk, u.shape[0] - lo), z.size)), center, u[lo:lo + chunk])
        k, d = kernels.argmin_dist(z, graph_points(phi, block), phi.n)
        if d < best_d:
            best_k, best_d = lo + k, d
    return unshear(z, center, u[best_k]), best_d
