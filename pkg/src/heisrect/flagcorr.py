"""Flag correspondences in H^1.

For a base point p on the surface S, the characteristic curve s -> tau_p(s)
solves tau' = phi^(p^-1)(s, tau), tau(0) = 0.  With psi_p(y) =
phi^(p^-1)(y, tau_p(y)) the straightening map is

    Psi_p(y, t) = (psi_p(y), y, t - y psi_p(y) / 2 + tau_p(y)),

the flag p . Psi_p(W) touches S along p . Phi^(p^-1)(y, tau_p(y)), and the flag
oracle returns the surface point nearest to p . Psi_p(x^-1 v).

The characteristic equation is integrated with fixed-step classical
Runge-Kutta on the nodes k h, outward from 0 in both directions; values
between nodes come from one partial step taken from the node closer to 0.
For t-independent surfaces (flags, constants) tau_p is computed by exact
quadrature instead.
"""

from dataclasses import dataclass

import numpy as np

from heisrect import kernels
from heisrect.errors import NumericalFailure, UsageError
from heisrect.graph import graph_points, translate_fn
from heisrect.group import dist, group_inv, group_mul, split
from heisrect.nearest import nearest_point_batch
from heisrect.oracle import CorrespondenceOracle
from heisrect.surfaces import Constant, Flag, FlagProfile, FunctionGraph

DEFAULT_STEP = 1e-3


def _require_h1(phi):
    if phi.n != 1:
        raise UsageError("flag correspondences are defined in H^1 only")


def _exact_quadrature(phi):
    """tau_p for t-independent surfaces, or None when phi depends on t."""
    if isinstance(phi, Flag):
        prof = phi.profile

        def tau(p, s):
            y = p[..., 1]
            return prof.integral(y + s) - prof.integral(y) - p[..., 0] * s

        return tau
    if isinstance(phi, Constant):
        return lambda p, s: (phi.c - p[..., 0]) * s
    return None


def _rk4(f, s, tau, h):
    k1 = f(s, tau)
    k2 = f(s + 0.5 * h, tau + 0.5 * h * k1)
    k3 = f(s + 0.5 * h, tau + 0.5 * h * k2)
    k4 = f(s + h, tau + h * k3)
    return tau + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


@dataclass
class TauSolution:
    """tau_p on the nodes k h, |k| <= half_count, for a batch of base points p."""

    phi: object
    p: np.ndarray
    step: float
    half_count: int
    grid: np.ndarray

    @property
    def range(self):
        return self.half_count * self.step

    @property
    def nodes(self):
        return np.arange(-self.half_count, self.half_count + 1) * self.step

    def rhs(self, rows):
        p = self.p[rows]
        return lambda s, tau: translate_fn(self.phi, p, np.stack([s, tau], axis=-1))

    def __call__(self, s, rows=None):
        """tau_p(s) with s broadcast against the batch of base points."""
        rows = np.arange(self.p.shape[0]) if rows is None else np.asarray(rows)
        s = np.broadcast_to(np.asarray(s, dtype=np.float64), rows.shape).copy()
        if np.any(np.abs(s) > self.range * (1 + 1e-12)):
            raise UsageError(f"characteristic requested at |s| = {np.max(np.abs(s))}, "
                             f"beyond its range {self.range}")
        exact = _exact_quadrature(self.phi)
        if exact is not None:
            return exact(self.p[rows], s)
        k = np.trunc(s / self.step).astype(np.int64)
        k = np.clip(k, -self.half_count, self.half_count)
        base = self.grid[rows, k + self.half_count]
        partial = s - k * self.step
        return _rk4(self.rhs(rows), k * self.step, base, partial)

    def quadratic_constant(self):
        """sup over nonzero nodes of |tau_p(s)| / s^2, per base point."""
        s = self.nodes
        mask = s != 0
        return np.max(np.abs(self.grid[:, mask]) / s[mask] ** 2, axis=-1)

    def rows(self, idx):
        idx = np.asarray(idx)
        return TauSolution(self.phi, self.p[idx], self.step, self.half_count, self.grid[idx])


def solve_tau(phi, p, range_, step=DEFAULT_STEP):
    """Integrate tau' = phi^(p^-1)(s, tau), tau(0) = 0 on [-range_, range_] for each row of p."""
    _require_h1(phi)
    if not step > 0:
        raise UsageError("integration step must be positive")
    if not range_ > 0:
        raise UsageError("characteristic range must be positive")
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    m = p.shape[0]
    half = max(1, int(np.ceil(range_ / step - 1e-9)))
    s_nodes = np.arange(-half, half + 1) * step
    exact = _exact_quadrature(phi)
    if exact is not None:
        grid = exact(p[:, None, :], s_nodes[None, :])
        return TauSolution(phi, p, float(step), half, grid)

    grid = np.zeros((m, 2 * half + 1))
    f = lambda s, tau: translate_fn(phi, p, np.stack([np.broadcast_to(s, tau.shape), tau], axis=-1))
    bound = 2.0 * (np.abs(p[:, 0]) + phi.sup_abs)
    for direction in (1, -1):
        tau = np.zeros(m)
        for k in range(1, half + 1):
            s0 = direction * (k - 1) * step
            tau = _rk4(f, s0, tau, direction * step)
            if not np.all(np.isfinite(tau)) or np.any(np.abs(tau) > bound * k * step):
                raise NumericalFailure(f"characteristic left its a priori window at s = {direction * k * step}")
            grid[:, half + direction * k] = tau
    return TauSolution(phi, p, float(step), half, grid)


def psi_values(sol, y, rows=None):
    """psi_p(y) = phi^(p^-1)(y, tau_p(y))."""
    rows = np.arange(sol.p.shape[0]) if rows is None else np.asarray(rows)
    y = np.broadcast_to(np.asarray(y, dtype=np.float64), rows.shape)
    tau = sol(y, rows)
    return translate_fn(sol.phi, sol.p[rows], np.stack([y, tau], axis=-1)), tau


def psi_map(sol, u, rows=None):
    """Psi_p(u) for model points u = (y, t), one per selected base point."""
    u = np.asarray(u, dtype=np.float64)
    y, t = u[..., 0], u[..., 1]
    psi, tau = psi_values(sol, y, rows)
    return np.stack([psi, y, t - 0.5 * y * psi + tau], axis=-1)


def psi_p(phi, p, u, step=DEFAULT_STEP, sol=None):
    """Psi_p(u) for a single base point p on the surface."""
    u = np.asarray(u, dtype=np.float64)
    if sol is None:
        sol = solve_tau(phi, p, max(float(np.max(np.abs(u[..., 0]))), step), step)
    flat = u.reshape(-1, 2)
    out = psi_map(sol, flat, np.zeros(flat.shape[0], dtype=np.int64))
    return out.reshape(u.shape[:-1] + (3,))


def flag_param(profile, u):
    """Psi_F(y, t) = (psi(y), y, t - y psi(y) / 2 + integral_0^y psi)."""
    if not isinstance(profile, FlagProfile):
        profile = FlagProfile(*profile)
    u = np.asarray(u, dtype=np.float64)
    y, t = u[..., 0], u[..., 1]
    v = profile(y)
    return np.stack([v, y, t - 0.5 * y * v + profile.integral(y)], axis=-1)


def flag_approx_error(phi, p, u, step=DEFAULT_STEP, sol=None):
    """d(Psi_p(y, t), Phi^(p^-1)(y, tau_p(y) + t)) for a single base point p."""
    _require_h1(phi)
    u = np.asarray(u, dtype=np.float64)
    a = psi_p(phi, p, u, step, sol)
    if sol is None:
        sol = solve_tau(phi, p, max(float(np.max(np.abs(u[..., 0]))), step), step)
    flat = u.reshape(-1, 2)
    rows = np.zeros(flat.shape[0], dtype=np.int64)
    tau = sol(flat[:, 0], rows)
    w = np.stack([flat[:, 0], tau + flat[:, 1]], axis=-1)
    pp = np.broadcast_to(sol.p[0], (flat.shape[0], 3))
    b = graph_points(phi, w, translate_fn(phi, pp, w))
    return dist(a.reshape(-1, 3), b).reshape(u.shape[:-1])


def flag_approx_error_formula(phi, p, u, step=DEFAULT_STEP, sol=None):
    """|phi^(p^-1)(y, tau_p(y) + t) - phi^(p^-1)(y, tau_p(y))|."""
    u = np.asarray(u, dtype=np.float64)
    if sol is None:
        sol = solve_tau(phi, p, max(float(np.max(np.abs(u[..., 0]))), step), step)
    flat = u.reshape(-1, 2)
    rows = np.zeros(flat.shape[0], dtype=np.int64)
    tau = sol(flat[:, 0], rows)
    pp = np.broadcast_to(sol.p[0], (flat.shape[0], 3))
    a = translate_fn(phi, pp, np.stack([flat[:, 0], tau + flat[:, 1]], axis=-1))
    b = translate_fn(phi, pp, np.stack([flat[:, 0], tau], axis=-1))
    return np.abs(a - b).reshape(u.shape[:-1])


def flag_surface(sol, row=0):
    """The flag Psi_p(W) in the frame of p, as the intrinsic graph of y -> psi_p(y)."""
    rng = sol.range

    def fn(w):
        y = np.clip(w[..., 0], -rng, rng)
        rows = np.full(y.shape, row).ravel()
        return psi_values(sol, y.ravel(), rows)[0].reshape(y.shape)

    bound = float(np.abs(sol.p[row, 0]) + sol.phi.sup_abs)
    return FunctionGraph(1, fn, bound, declared_L=sol.phi.declared_L)


def psi_distortion(sol, u, row=0):
    """(min, max) of d(Psi_p(u_i), Psi_p(u_j)) / d_G(u_i, u_j) over all sample pairs."""
    u = np.asarray(u, dtype=np.float64)
    img = psi_map(sol, u, np.full(u.shape[0], row))
    i, j = np.triu_indices(u.shape[0], k=1)
    dg = np.sqrt(np.hypot((u[i, 0] - u[j, 0]) ** 2, 4.0 * (u[i, 1] - u[j, 1])))
    keep = dg > 0
    r = kernels.dist(img[i[keep]], img[j[keep]], 1) / dg[keep]
    return float(np.min(r)), float(np.max(r))


def neighborhood_check(phi, p, r, count=200, seed=0, step=DEFAULT_STEP, tol=1e-10):
    """Worst quotients dist/delta, delta = H r^(1+alpha), for the two inclusions and the projection.

    Returns (c1, c2, c3): surface points in B(p, r) against the flag, flag points
    in B(p, r) against the surface, and horizontal projections of surface points
    against the projected flag curve.
    """
    _require_h1(phi)
    if not r > 0:
        raise UsageError("radius must be positive")
    p = np.asarray(p, dtype=np.float64)
    rng = np.random.default_rng(seed)
    delta = phi.declared_H * r ** (1.0 + phi.declared_alpha)
    sol = solve_tau(phi, p, 2.0 * r, step)

    # surface points within r of p: Phi(pi_W(p . w)) for small w
    w_off = np.stack([rng.uniform(-r, r, count), rng.uniform(-r * r, r * r, count)], axis=-1)
    pts = graph_points(phi, split(group_mul(p, np.concatenate([np.zeros((count, 1)), w_off], -1)))[0])
    rel = group_mul(group_inv(p), pts)
    inside = kernels.dist(rel, np.zeros(3), 1) <= r
    rel = rel[inside]
    flag = flag_surface(sol)
    _, d1 = nearest_point_batch(flag, rel, tol)
    c3 = np.abs(rel[:, 0] - psi_values(sol, np.clip(rel[:, 1], -sol.range, sol.range),
                                       np.zeros(rel.shape[0], dtype=np.int64))[0])

    # flag points within r of p
    u = np.stack([rng.uniform(-r, r, count), rng.uniform(-r * r, r * r, count)], axis=-1)
    img = psi_map(sol, u, np.zeros(count, dtype=np.int64))
    keep = kernels.dist(img, np.zeros(3), 1) <= r
    _, d2 = nearest_point_batch(phi, group_mul(p, img[keep]), tol)
    worst = lambda d: float(np.max(d) / delta) if d.size else 0.0
    return worst(d1), worst(d2), worst(c3)


class FlagOracle(CorrespondenceOracle):
    """i_{w -> p}(v): nearest surface point to p . Psi_p(w^-1 v)."""

    kind = "flag"

    def __init__(self, phi, tol=1e-9, step=DEFAULT_STEP, declared_L=None, declared_A=None):
        _require_h1(phi)
        super().__init__(
            phi, tol,
            2.0 * (1.0 + phi.declared_L) if declared_L is None else declared_L,
            4.0 * phi.declared_H if declared_A is None else declared_A,
            phi.declared_alpha,
        )
        self.step = float(step)
        self._cache = {}

    def solutions(self, p, range_):
        """TauSolution for the rows of p, reusing cached characteristics."""
        p = np.atleast_2d(np.asarray(p, dtype=np.float64))
        half = max(1, int(np.ceil(range_ / self.step - 1e-9)))
        keys = [row.tobytes() for row in p]
        missing = {}
        for k, row in zip(keys, p):
            hit = self._cache.get(k)
            if (hit is None or hit.shape[0] < 2 * half + 1) and k not in missing:
                missing[k] = row
        if missing:
            rows = np.array(list(missing.values()))
            sol = solve_tau(self.phi, rows, half * self.step, self.step)
            for k, g in zip(missing, sol.grid):
                self._cache[k] = g
        grid = np.empty((p.shape[0], 2 * half + 1))
        for i, k in enumerate(keys):
            g = self._cache[k]
            c = (g.shape[0] - 1) // 2
            grid[i] = g[c - half:c + half + 1]
        return TauSolution(self.phi, p, self.step, half, grid)

    def model_map(self, p, u):
        need = float(np.max(np.abs(u[:, 0]))) if u.size else self.step
        sol = self.solutions(p, _round_range(need, self.step))
        return psi_map(sol, u)


def _round_range(need, step):
    """Smallest power of two >= need (and >= step), so cached solutions are reused."""
    return float(2.0 ** np.ceil(np.log2(max(need, step))))


def make_flag_oracle(phi, tol=1e-9, step=DEFAULT_STEP):
    return FlagOracle(phi, tol, step)
