"""The iterative bilipschitz construction and its audits.

Given a correspondence oracle and a fat Cantor realization, the maps F_n are
built level by level: F_{n0 - 1} is the constant p0 and, for every cube Q of
level n containing kept points,

    F_n = i^n_{c_Q -> F_{n-1}(c_Q)}  on Q,

with c_Q the box center.  F is approximated by F_{n_max} on the kept points.
The audits measure per-level increments, distortion ratios, the Cauchy
cascade, and fitted scale-isometry and scale-compatibility constants.
"""

from dataclasses import dataclass, field

import numpy as np

from heisrect import kernels
from heisrect.cubes import (
    Cube,
    auto_tau,
    axis_branching,
    axis_sides,
    box_twist_radius,
    build_fat_cantor,
    cube_indices,
    cube_of_point,
    model_arity,
)
from heisrect.errors import InvariantViolation, UsageError
from heisrect.graph import graph_points
from heisrect.group import model_dist, model_mul, model_norm, model_vertical_axis

ISO_GRID = 64
PASS_FACTOR = 1.1
SLOPE_SLACK = 0.05


# ---------------------------------------------------------------- n0


def geometric_constant(alpha):
    """1 / (1 - 2^-(1+alpha)), the tail factor of sum_m 2^(-m(1+alpha))."""
    return 1.0 / (1.0 - 2.0 ** -(1.0 + alpha))


def n0_thresholds(L, A, alpha, tau):
    """The four real thresholds whose ceiling-maximum is n0.

    1. A 2^(-n(1+a)) <= tau 2^(-(n+1)(1+e)) / (4L)        (error below a quarter separation)
    2. c A 2^(-n(1+a)) <= tau 2^(-(n+1)(1+e)) / (8L)      (geometric tail below an eighth)
    3. (L + A + c A) 2^(-n0) <= 1/2                        (image stays in B(p0, 1))
    4. 2^(-n0) <= 1 / (4L)
    with e = alpha / 2 and c = 1 / (1 - 2^-(1+alpha)).
    """
    if not (L > 0 and A > 0 and tau > 0):
        raise UsageError("L, A and tau must be positive")
    if not 0 < alpha <= 1:
        raise UsageError("alpha must lie in (0, 1]")
    eps = alpha / 2.0
    c = geometric_constant(alpha)
    t1 = ((1.0 + eps) + np.log2(4.0 * L * A / tau)) / (alpha - eps)
    t2 = ((1.0 + eps) + np.log2(8.0 * L * A * c / tau)) / (alpha - eps)
    t3 = np.log2(2.0 * (L + A + c * A))
    t4 = np.log2(4.0 * L)
    return float(t1), float(t2), float(t3), float(t4)


def compute_n0(L, A, alpha, tau):
    """Smallest integer n0 >= 0 satisfying all four admissibility inequalities."""
    return max(0, int(np.ceil(max(n0_thresholds(L, A, alpha, tau)) - 1e-12)))


def resolve_scales(L, A, alpha, depth, tau_of_n0, n0_cap=200):
    """An n0 with n0 >= compute_n0(L, A, alpha, tau(n0)); tau may depend on n0.

    The result is the smallest such n0 whenever tau is nondecreasing in n0, as
    the automatic tau rule is.
    """
    n0 = compute_n0(L, A, alpha, tau_of_n0(0))
    while n0 <= n0_cap and n0 < compute_n0(L, A, alpha, tau_of_n0(n0)):
        n0 += 1
    if n0 > n0_cap:
        raise UsageError(f"admissible n0 exceeds the cap {n0_cap}")
    while n0 > 0 and compute_n0(L, A, alpha, tau_of_n0(n0 - 1)) <= n0 - 1:
        n0 -= 1
    return n0, tau_of_n0(n0)


# ---------------------------------------------------------------- sampling


def sample_model_ball(n, radius, count, rng):
    """Uniform samples of the d_G ball of the given radius about the identity."""
    vt = model_vertical_axis(n)
    half = np.full(2 * n, float(radius))
    half[vt] = radius * radius / 4.0
    out = np.empty((0, 2 * n))
    while out.shape[0] < count:
        cand = rng.uniform(-1.0, 1.0, (2 * count, 2 * n)) * half
        out = np.concatenate([out, cand[model_norm(cand) <= radius]])
    return out[:count]


def sample_base_points(phi, count, rng, window=0.5):
    """Surface points Phi(w) with w uniform in [-window, window]^2n."""
    w = rng.uniform(-window, window, (count, 2 * phi.n))
    return graph_points(phi, w)


# ---------------------------------------------------------------- build


@dataclass
class MapTable:
    points: np.ndarray
    values: np.ndarray
    levels: np.ndarray
    history: np.ndarray
    increments: np.ndarray
    p0: np.ndarray
    centers: dict = field(default_factory=dict)

    @property
    def n(self):
        return (self.values.shape[-1] - 1) // 2


def build_map(oracle, cantor, p0=None):
    """Build F_{n0}, ..., F_{n_max} on the kept points of the realization."""
    n = oracle.n
    if cantor.n != n:
        raise UsageError("oracle and Cantor realization live in different groups")
    p0 = np.zeros(2 * n + 1) if p0 is None else np.asarray(p0, dtype=np.float64)
    g = cantor.kept_points
    levels = np.arange(cantor.n0, cantor.n_max + 1)
    history = np.empty((levels.size, g.shape[0], 2 * n + 1))
    centers = {}

    prev_keys = None
    prev_vals = None
    prev_centers = None
    for li, k in enumerate(levels):
        idx = cube_indices(g, k)
        keys, inverse = np.unique(idx, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        c = (keys + 0.5) * axis_sides(n, k)
        if prev_keys is None:
            base = np.broadcast_to(p0, (keys.shape[0], 2 * n + 1)).copy()
        else:
            parent = _parent_rows(keys, prev_keys, n)
            # V(Q') = F_{k-1}(c_Q') = i^{k-1}_{c_Q -> V(Q)}(c_Q')
            base = oracle.eval(k - 1, prev_centers[parent], prev_vals[parent], c)
        history[li] = oracle.eval(k, c[inverse], base[inverse], g)
        centers[int(k)] = c
        prev_keys, prev_vals, prev_centers = keys, base, c

    inc = np.array([float(np.max(kernels.dist(history[i], history[i + 1], n)))
                    for i in range(levels.size - 1)])
    return MapTable(g, history[-1].copy(), levels, history, inc, p0, centers)


def _parent_rows(keys, prev_keys, n):
    par = np.floor_divide(keys, axis_branching(n))
    lookup = {tuple(r): i for i, r in enumerate(prev_keys)}
    try:
        return np.array([lookup[tuple(r)] for r in par])
    except KeyError:
        raise InvariantViolation("a child cube has no parent among the previous level") from None


# ---------------------------------------------------------------- audit


@dataclass
class BilipAudit:
    level_increments: list
    increment_bounds: list
    ratio_min: float
    ratio_max: float
    L: float
    ratios_ok: bool
    increments_ok: bool
    cascade_ok: bool
    ball_ok: bool
    level_ratio_ok: bool
    tail_bound: float
    fitted_iso_L: float = float("nan")
    fitted_iso_A: float = float("nan")
    fitted_comp_A: float = float("nan")
    offending: list = field(default_factory=list)

    @property
    def passed(self):
        return self.ratios_ok and self.cascade_ok and self.ball_ok

    def summary(self):
        d = dict(vars(self))
        d["passed"] = self.passed
        return d


def sample_pairs(count, m, rng):
    i = rng.integers(0, m, count)
    j = rng.integers(0, m - 1, count)
    j = np.where(j >= i, j + 1, j)
    return i, j


def audit_bilip(table, L, A, alpha, pairs=None, count=1000, seed=0):
    """Distortion, increment, cascade and ball checks for a built map table."""
    m = table.points.shape[0]
    if m < 2:
        raise UsageError("audit needs at least two table entries")
    n = table.n
    rng = np.random.default_rng(seed)
    i, j = sample_pairs(count, m, rng) if pairs is None else pairs
    dg = model_dist(table.points[i], table.points[j])
    keep = dg > 0
    i, j, dg = i[keep], j[keep], dg[keep]
    dm = kernels.dist(table.values[i], table.values[j], n)
    ratio = dm / dg
    rmin, rmax = float(np.min(ratio)), float(np.max(ratio))

    bounds = [A * 2.0 ** (-k * (1.0 + alpha)) for k in table.levels[:-1]]
    inc = table.increments
    offending = [int(k) for k, v, b in zip(table.levels[:-1], inc, bounds) if v > b]

    # d(F_k g, F_{n_max} g) <= sum_{m >= k} increments_m on every kept point
    tails = np.concatenate([np.cumsum(inc[::-1])[::-1], [0.0]])
    cascade = True
    for li in range(table.levels.size):
        d = kernels.dist(table.history[li], table.values, n)
        cascade &= bool(np.all(d <= tails[li] * (1 + 1e-9) + 1e-15))

    ball = bool(np.all(kernels.dist(table.values, table.p0, n) < 1.0))

    # (form2): at the last common level k of x and y, F_k distorts by [3/(4L), 5L/4]
    level_ok = True
    for li, k in enumerate(table.levels):
        ci = cube_indices(table.points[i], k)
        cj = cube_indices(table.points[j], k)
        same = np.all(ci == cj, axis=-1)
        if li + 1 < table.levels.size:
            nxt = np.all(cube_indices(table.points[i], k + 1) == cube_indices(table.points[j], k + 1), axis=-1)
            sel = same & ~nxt
        else:
            sel = same
        if np.any(sel):
            r = kernels.dist(table.history[li][i[sel]], table.history[li][j[sel]], n) / dg[sel]
            level_ok &= bool(np.all((r >= 0.75 / L) & (r <= 1.25 * L)))

    c = geometric_constant(alpha)
    return BilipAudit(
        level_increments=[float(v) for v in inc],
        increment_bounds=bounds,
        ratio_min=rmin, ratio_max=rmax, L=float(L),
        ratios_ok=bool(rmin >= 1.0 / (2.0 * L) and rmax <= 2.0 * L),
        increments_ok=not offending,
        cascade_ok=bool(cascade), ball_ok=ball, level_ratio_ok=bool(level_ok),
        tail_bound=float(A * 2.0 ** (-table.levels[0] * (1.0 + alpha)) * c),
        offending=offending,
    )


# ---------------------------------------------------------------- scale isometry and compatibility


@dataclass
class IsoFit:
    n: int
    L_hat: float
    A_hat: float
    L_model: float
    A_at_model: float
    envelope: float
    L_grid: np.ndarray
    A_curve: np.ndarray
    passed: bool


def iso_curve(dg, dm, n, alpha, L_grid):
    """A(L) = max violation of L^-1 dg - A s <= dm <= L dg + A s, s = 2^(-n(1+alpha))."""
    s = 2.0 ** (-n * (1.0 + alpha))
    L = L_grid[:, None]
    viol = np.maximum.reduce([np.zeros_like(L * dg), dg / L - dm, dm - L * dg])
    return np.max(viol, axis=1) / s


def _pair_samples(oracle, n, count, rng, base_window):
    p = sample_base_points(oracle.phi, count, rng, base_window)
    x = rng.uniform(-0.5, 0.5, (count, 2 * oracle.n)) * 2.0 ** -n
    return p, x


def verify_iso(oracle, n, count=200, seed=0, base_window=0.5, L_max=None, factor=PASS_FACTOR):
    """Fit the scale-isometry constants (L, A) at scale n from samples y, z in B(x, 2^-n)."""
    if count < 10:
        raise UsageError("verify-iso needs at least 10 samples")
    rng = np.random.default_rng(seed)
    p, x = _pair_samples(oracle, n, count, rng, base_window)
    r = 2.0 ** -n
    y = model_mul(x, sample_model_ball(oracle.n, r, count, rng))
    z = model_mul(x, sample_model_ball(oracle.n, r, count, rng))
    dg = model_dist(y, z)
    iy = oracle.eval(n, x, p, y)
    iz = oracle.eval(n, x, p, z)
    dm = kernels.dist(iy, iz, oracle.n)
    my = oracle.target(n, x, p, y)
    mz = oracle.target(n, x, p, z)
    d_model = kernels.dist(my, mz, oracle.n)

    alpha = oracle.declared_alpha
    keep = dg > 0
    L_model = float(max(np.max(d_model[keep] / dg[keep]), np.max(dg[keep] / d_model[keep]), 1.0))
    top = max(2.0 * oracle.declared_L, L_model) if L_max is None else L_max
    L_grid = np.exp(np.linspace(0.0, np.log(top), ISO_GRID))
    A_curve = iso_curve(dg, dm, n, alpha, L_grid)
    ok = np.flatnonzero(A_curve <= oracle.declared_A)
    k = int(ok[0]) if ok.size else int(np.argmin(A_curve))
    A_model = float(iso_curve(dg, dm, n, alpha, np.array([L_model]))[0])
    envelope = float(np.max(np.abs(dm - d_model)))
    passed = bool(L_grid[k] <= factor * oracle.declared_L and A_curve[k] <= factor * oracle.declared_A)
    return IsoFit(n, float(L_grid[k]), float(A_curve[k]), L_model, A_model, envelope,
                  L_grid, A_curve, passed)


@dataclass
class CompFit:
    n: int
    deviations: np.ndarray
    scales: np.ndarray
    envelope: float
    slope: float
    A_hat: float


def verify_comp(oracle, n, count=200, seed=0, base_window=0.5):
    """Deviations d(i^n_{x->p}(z), i^{n+1}_{y->q}(z)) with q = i^n_{x->p}(y)."""
    if count < 10:
        raise UsageError("verify-comp needs at least 10 samples")
    rng = np.random.default_rng(seed)
    p, x = _pair_samples(oracle, n, count, rng, base_window)
    r = 2.0 ** -n
    u = sample_model_ball(oracle.n, r, count, rng)
    v = sample_model_ball(oracle.n, r, count, rng)
    y = model_mul(x, u)
    z = model_mul(x, v)
    q = oracle.eval(n, x, p, y)
    a = oracle.eval(n, x, p, z)
    b = oracle.eval(n + 1, y, q, z)
    dev = kernels.dist(a, b, oracle.n)
    scale = np.maximum.reduce([model_norm(u), model_norm(v), model_dist(y, z)])
    good = (dev > 0) & (scale > 0)
    slope = float(np.polyfit(np.log(scale[good]), np.log(dev[good]), 1)[0]) if good.sum() > 2 else float("nan")
    env = float(np.max(dev))
    return CompFit(n, dev, scale, env, slope, env / 2.0 ** (-n * (1.0 + oracle.declared_alpha)))


def envelope_slope(levels, envelopes):
    """log2-slope of envelope values against the level n (negative for decay)."""
    levels = np.asarray(levels, dtype=np.float64)
    e = np.asarray(envelopes, dtype=np.float64)
    good = e > 0
    if good.sum() < 2:
        return float("-inf")
    return float(np.polyfit(levels[good], np.log2(e[good]), 1)[0])


# ---------------------------------------------------------------- pipeline


def auto_tau_for(center, n0, n_max, alpha):
    """The tau that build_fat_cantor(..., tau="auto") would choose."""
    n = model_arity(center)
    root = Cube.from_index(cube_of_point(center, n0), n)
    return auto_tau(n, n0, n_max, alpha / 2.0, box_twist_radius(root.lower, root.upper, n))


@dataclass
class PipelineResult:
    n0: int
    n_max: int
    tau: float
    cantor: object
    table: MapTable
    audit: BilipAudit
    iso: list
    comp: list
    tails: list
    tail_bounds: list
    tails_ok: bool
    passed: bool


def fit_constants(oracle, levels, count=200, seed=0):
    """Per-level scale-isometry and scale-compatibility fits; returns (iso fits, comp fits, L', A')."""
    iso = [verify_iso(oracle, int(k), count, seed + int(k)) for k in levels]
    comp = [verify_comp(oracle, int(k), count, seed + int(k)) for k in levels]
    L_fit = max(f.L_hat for f in iso)
    A_fit = max(max(f.A_hat for f in comp), max(f.A_hat for f in iso))
    return iso, comp, L_fit, A_fit


def run_pipeline(oracle, center=None, depth=8, n0="auto", tau="auto", kept_count=256,
                 pairs=1000, fit_count=200, seed=0):
    """compute_n0, fat Cantor set, F_{n_max} table, audit with fitted constants."""
    n = oracle.n
    center = np.zeros(2 * n) if center is None else np.asarray(center, dtype=np.float64)
    alpha = oracle.declared_alpha
    if depth < 1:
        raise UsageError("depth must be at least 1")

    def tau_of(k):
        return auto_tau_for(center, k, k + depth, alpha) if tau == "auto" else float(tau)

    if n0 == "auto":
        n0, tau_v = resolve_scales(oracle.declared_L, oracle.declared_A, alpha, depth, tau_of)
    else:
        n0, tau_v = int(n0), tau_of(int(n0))
    cantor = build_fat_cantor(center, n0, n0 + depth, alpha, tau_v, kept_count, seed)
    table = build_map(oracle, cantor)
    iso, comp, L_fit, A_fit = fit_constants(oracle, table.levels[:-1], fit_count, seed)
    audit = audit_bilip(table, L_fit, A_fit, alpha, count=pairs, seed=seed)
    audit.fitted_iso_L = L_fit
    audit.fitted_iso_A = max(f.A_hat for f in iso)
    audit.fitted_comp_A = max(f.A_hat for f in comp)

    # tail bound: sum_{m >= k} increments_m <= A' c 2^(-k(1+alpha))
    c = geometric_constant(alpha)
    inc = table.increments
    tails = [float(np.sum(inc[i:])) for i in range(inc.size)]
    bounds = [A_fit * c * 2.0 ** (-int(k) * (1.0 + alpha)) for k in table.levels[:-1]]
    tails_ok = all(t <= PASS_FACTOR * b for t, b in zip(tails, bounds))
    passed = audit.ratios_ok and audit.cascade_ok and audit.ball_ok and tails_ok
    return PipelineResult(n0, n0 + depth, tau_v, cantor, table, audit, iso, comp,
                          tails, bounds, tails_ok, passed)
