"""Anisotropic dyadic cubes in the model group G and fat Cantor sets.

Level-k cubes are the cells of a global coordinate lattice: horizontal sides
2^-k sigma, vertical side 4^-k sigma^2, with sigma = 1/4 and half-open cells
closed on lower faces.  Children are obtained by halving every horizontal side
and quartering the vertical one, so they partition the parent exactly.

A fat Cantor set keeps, at each level k = n0, ..., n_max, the core of every
surviving cube: the points whose certified distance to the complement of the
cube is at least rho_k 2^-k, with rho_k = tau 2^(-k epsilon).  The certified
bound depends only on face gaps (and on a global bound R for |z| inside Q0),
so every core is a coordinate box and the surviving set at each level is a
product of one-dimensional interval families, one per coordinate axis.
"""

from dataclasses import dataclass, field

import numpy as np

from heisrect.errors import InvariantViolation, UsageError
from heisrect.group import model_vertical_axis

SIGMA = 0.25
ROOT_RADIUS = 1.0
AUTO_LOSS_BUDGET = 0.5


def model_arity(g):
    d = np.shape(g)[-1]
    if d < 2 or d % 2:
        raise UsageError(f"not a model-group point: last axis has length {d}")
    return d // 2


def axis_sides(n, level):
    """Per-axis side lengths of level-``level`` cubes in G of arity n."""
    sides = np.full(2 * n, 2.0 ** -level * SIGMA)
    sides[model_vertical_axis(n)] = 4.0 ** -level * SIGMA ** 2
    return sides


def axis_branching(n):
    """Number of children per axis: 2 horizontally, 4 vertically."""
    b = np.full(2 * n, 2, dtype=np.int64)
    b[model_vertical_axis(n)] = 4
    return b


def twist_axes(n):
    """Axes carrying the H^(n-1) horizontal part z (empty for the parabolic plane)."""
    return np.arange(2 * n - 2) if n >= 2 else np.arange(0)


def box_twist_radius(lo, hi, n):
    """sup |z| over the box [lo, hi] (0 for the parabolic plane)."""
    ax = twist_axes(n)
    if ax.size == 0:
        return 0.0
    far = np.maximum(np.abs(lo[..., ax]), np.abs(hi[..., ax]))
    return float(np.max(np.sqrt(np.sum(far * far, axis=-1))))


def vertical_gap_for(d, n, R):
    """Vertical face gap that forces metric distance >= d (inverse of vertical_bound)."""
    d = np.asarray(d, dtype=np.float64)
    if n == 1:
        return d * d / 4.0
    return d * d / 4.0 + 0.5 * (R + d) * d


def vertical_bound(g, n, R):
    """Certified distance to a vertical face at coordinate gap g.

    Parabolic plane: 2 sqrt(g).  Otherwise the positive root of
    d^2/4 + (R + d) d / 2 = g, where R bounds |z| at the point.
    """
    g = np.maximum(np.asarray(g, dtype=np.float64), 0.0)
    if n == 1:
        return 2.0 * np.sqrt(g)
    R = np.asarray(R, dtype=np.float64)
    return (-0.5 * R + np.sqrt(0.25 * R * R + 3.0 * g)) / 1.5


def separation_from_gaps(gap_h, gap_t, n, R):
    """Certified lower bound for d_G between boxes separated by the given coordinate gaps.

    Two boxes separated only vertically by gap_t give points g, h with
    ||h^-1 g|| >= max(|dz|, 2 sqrt(gap_t - R |dz| / 2)) >= sqrt(R^2 + 4 gap_t) - R.
    For the parabolic plane (R = 0) this is exact.
    """
    v = np.sqrt(R * R + 4.0 * gap_t) - R
    return np.minimum(gap_h, v)


@dataclass(frozen=True)
class CubeIndex:
    level: int
    idx: tuple

    def parent(self, n):
        b = axis_branching(n)
        return CubeIndex(self.level - 1, tuple(int(i) for i in np.floor_divide(self.idx, b)))


@dataclass(frozen=True)
class Cube:
    """A lattice cell of G; ``lower``/``upper`` are its corner coordinates."""

    index: CubeIndex
    n: int
    lower: np.ndarray = field(repr=False, compare=False)
    upper: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_index(cls, index, n):
        sides = axis_sides(n, index.level)
        lo = np.asarray(index.idx, dtype=np.float64) * sides
        return cls(index, n, lo, lo + sides)

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    def contains(self, g):
        g = np.asarray(g, dtype=np.float64)
        return bool(np.all((g >= self.lower) & (g < self.upper)))

    def children(self):
        b = axis_branching(self.n)
        base = np.asarray(self.index.idx) * b
        grids = np.meshgrid(*[np.arange(k) for k in b], indexing="ij")
        offs = np.stack([m.ravel() for m in grids], axis=-1)
        return [Cube.from_index(CubeIndex(self.index.level + 1, tuple(int(v) for v in base + o)),
                                self.n) for o in offs]

    def diameter_bound(self, R=None):
        """Upper bound for diam_G; exact for the parabolic plane."""
        return box_diameter_bound(self.upper - self.lower, self.n,
                                  box_twist_radius(self.lower, self.upper, self.n) if R is None else R)


def box_diameter_bound(sides, n, R):
    vt = model_vertical_axis(n)
    h = np.delete(sides, vt)
    dh = float(np.sqrt(np.sum(h * h)))
    dz = float(np.sqrt(np.sum(sides[twist_axes(n)] ** 2))) if n >= 2 else 0.0
    dt = sides[vt] + 0.5 * R * dz
    return float((dh ** 4 + 16.0 * dt * dt) ** 0.25)


def cube_of_point(g, level, root_radius=ROOT_RADIUS):
    """Index of the level-``level`` cube containing g (lower faces closed)."""
    g = np.asarray(g, dtype=np.float64)
    n = model_arity(g)
    if np.any(np.abs(g) > root_radius) or not np.all(np.isfinite(g)):
        raise UsageError("point lies outside the root box")
    idx = np.floor(g / axis_sides(n, level)).astype(np.int64)
    return CubeIndex(int(level), tuple(int(i) for i in idx))


def cube_indices(g, level):
    """Vectorized cube_of_point: integer index array with the shape of g."""
    g = np.asarray(g, dtype=np.float64)
    return np.floor(g / axis_sides(model_arity(g), level)).astype(np.int64)


def dist_lower_bound_to_complement(q, cube, R=None):
    """Certified lower bound for dist(q, complement of the cube).

    ``R`` bounds |z| along the way; by default |z(q)|.
    """
    q = np.asarray(q, dtype=np.float64)
    n = cube.n
    if not cube.contains(q) and not np.all((q >= cube.lower) & (q <= cube.upper)):
        raise UsageError("point does not lie in the cube")
    gaps = np.minimum(q - cube.lower, cube.upper - q)
    vt = model_vertical_axis(n)
    g_h = float(np.min(np.delete(gaps, vt)))
    if R is None:
        R = float(np.linalg.norm(q[twist_axes(n)])) if n >= 2 else 0.0
    return float(min(g_h, vertical_bound(gaps[vt], n, R)))


def core_margins(n, level, rho, R):
    """Per-axis coordinate margins that certify distance >= rho 2^-level to the complement."""
    m = rho * 2.0 ** -level
    marg = np.full(2 * n, m)
    marg[model_vertical_axis(n)] = vertical_gap_for(m, n, R)
    return marg


def prune_boundary(cube, rho, parent_core=None, R=None):
    """Core box (lo, hi) of the cube, intersected with ``parent_core``; None if empty."""
    if not 0 < rho < 1:
        raise UsageError("pruning parameter rho must lie in (0, 1)")
    if R is None:
        R = box_twist_radius(cube.lower, cube.upper, cube.n)
    marg = core_margins(cube.n, cube.index.level, rho, R)
    lo = cube.lower + marg
    hi = cube.upper - marg
    if parent_core is not None:
        lo = np.maximum(lo, parent_core[0])
        hi = np.minimum(hi, parent_core[1])
    if np.any(lo >= hi):
        return None
    return lo, hi


def level_loss_bound(n, level, rho, R):
    """Fraction of each level cube lying in its pruned boundary region (union bound)."""
    return float(np.sum(2.0 * core_margins(n, level, rho, R) / axis_sides(n, level)))


def total_loss_bound(n, n0, n_max, tau, epsilon, R):
    return sum(level_loss_bound(n, k, tau * 2.0 ** (-k * epsilon), R) for k in range(n0, n_max + 1))


def predicted_measure(n, n0, n_max, tau, epsilon, R):
    """Closed-form kept measure, counting only the new inner faces created at each level.

    Outer faces of children lie in the already removed margin of the parent, so
    each surviving interval loses 2 (b - 1) margins when split into b children.
    Exact as long as no core interval empties out.
    """
    total = 1.0
    b = axis_branching(n)
    for a in range(2 * n):
        count = 1
        length = axis_sides(n, n0)[a] - 2.0 * core_margins(n, n0, tau * 2.0 ** (-n0 * epsilon), R)[a]
        for k in range(n0 + 1, n_max + 1):
            m = core_margins(n, k, tau * 2.0 ** (-k * epsilon), R)[a]
            length -= count * 2.0 * (b[a] - 1) * m
            count *= int(b[a])
        total *= length
    return total


def auto_tau(n, n0, n_max, epsilon, R, budget=AUTO_LOSS_BUDGET):
    """Largest tau whose cumulative boundary loss bound stays within ``budget``."""
    lo, hi = 0.0, 1.0
    while total_loss_bound(n, n0, n_max, hi, epsilon, R) <= budget:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total_loss_bound(n, n0, n_max, mid, epsilon, R) <= budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


@dataclass
class AxisFamily:
    """Surviving core intervals on one axis at one level, with their lattice cell indices."""

    cells: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    parent: np.ndarray

    @property
    def length(self):
        return float(np.sum(self.hi - self.lo))

    def min_gap(self):
        if self.lo.size < 2:
            return np.inf
        return float(np.min(self.lo[1:] - self.hi[:-1]))


@dataclass
class LevelRecord:
    level: int
    cubes_alive: int
    measure_kept: float
    min_separation: float
    required_separation: float
    separation_ok: bool
    loss_bound: float
    diameter_bound: float
    diameter_ok: bool
    nested_ok: bool


@dataclass
class CantorRealization:
    n: int
    n0: int
    n_max: int
    epsilon: float
    tau: float
    center: np.ndarray
    root_cube: Cube
    twist_radius: float
    levels: list
    families: list
    kept_points: np.ndarray
    measure_kept: float
    measure_ball: float

    @property
    def kept_fraction(self):
        return self.measure_kept / self.measure_ball

    def rho(self, level):
        return self.tau * 2.0 ** (-level * self.epsilon)

    def summary(self):
        return {
            "n": self.n, "n0": self.n0, "n_max": self.n_max, "epsilon": self.epsilon,
            "tau": self.tau, "twist_radius": self.twist_radius,
            "root_lower": self.root_cube.lower.tolist(), "root_upper": self.root_cube.upper.tolist(),
            "measure_kept": self.measure_kept, "measure_ball": self.measure_ball,
            "levels": [vars(r) for r in self.levels],
        }


def _refine_axis(fam, level, axis, n, margin):
    b = int(axis_branching(n)[axis])
    side = axis_sides(n, level)[axis]
    child = (fam.cells[:, None] * b + np.arange(b)[None, :]).ravel()
    parent = np.repeat(np.arange(fam.cells.size), b)
    lo = np.maximum(child * side + margin, fam.lo[parent])
    hi = np.minimum((child + 1) * side - margin, fam.hi[parent])
    keep = lo < hi
    return AxisFamily(child[keep], lo[keep], hi[keep], parent[keep])


def _level_record(families, n, level, tau, epsilon, R, nested_ok):
    vt = model_vertical_axis(n)
    counts = [f.cells.size for f in families]
    measure = float(np.prod([f.length for f in families]))
    gaps = [f.min_gap() for f in families]
    gap_h = min([g for a, g in enumerate(gaps) if a != vt], default=np.inf)
    sep = float(separation_from_gaps(gap_h, gaps[vt], n, R)) if np.prod(counts) > 1 else np.inf
    required = tau * 2.0 ** (-(1.0 + epsilon) * level)
    diam = box_diameter_bound(axis_sides(n, level), n, R)
    return LevelRecord(
        level=level, cubes_alive=int(np.prod(counts)), measure_kept=measure,
        min_separation=sep, required_separation=required, separation_ok=bool(sep >= required),
        loss_bound=level_loss_bound(n, level, tau * 2.0 ** (-level * epsilon), R),
        diameter_bound=diam, diameter_ok=bool(diam < 2.0 ** -level), nested_ok=nested_ok,
    )


def _nested(child, parent):
    return bool(np.all(child.lo >= parent.lo[child.parent]) and np.all(child.hi <= parent.hi[child.parent]))


def sample_kept_points(families, count, rng):
    """Uniform samples from the product of the final interval families."""
    cols = []
    for f in families:
        w = f.hi - f.lo
        k = rng.choice(w.size, size=count, p=w / w.sum())
        cols.append(f.lo[k] + rng.uniform(0.0, 1.0, count) * w[k])
    return np.stack(cols, axis=-1)


def build_fat_cantor(center, n0, n_max, alpha, tau="auto", kept_count=256, seed=0):
    """Fat Cantor set in G rooted at the level-n0 cube containing ``center``."""
    center = np.asarray(center, dtype=np.float64)
    n = model_arity(center)
    if not (isinstance(n0, (int, np.integer)) and n0 >= 0):
        raise UsageError("n0 must be a nonnegative integer")
    if not n_max > n0:
        raise UsageError("n_max must exceed n0")
    if not 0 < alpha <= 1:
        raise UsageError("alpha must lie in (0, 1]")
    epsilon = alpha / 2.0
    root = Cube.from_index(cube_of_point(center, n0), n)
    R = box_twist_radius(root.lower, root.upper, n)
    if tau == "auto":
        tau = auto_tau(n, n0, n_max, epsilon, R)
    tau = float(tau)
    if tau < 0:
        raise UsageError("tau must be nonnegative")

    families = []
    for axis in range(2 * n):
        cell = np.array([root.index.idx[axis]], dtype=np.int64)
        families.append(AxisFamily(cell, np.array([root.lower[axis]]), np.array([root.upper[axis]]),
                                   np.array([0])))
    levels = []
    history = []
    for level in range(n0, n_max + 1):
        marg = core_margins(n, level, tau * 2.0 ** (-level * epsilon), R) if tau > 0 else np.zeros(2 * n)
        if level == n0:
            new = [AxisFamily(f.cells, np.maximum(f.lo + marg[a], f.lo), f.hi - marg[a], f.parent)
                   for a, f in enumerate(families)]
            new = [AxisFamily(f.cells[f.lo < f.hi], f.lo[f.lo < f.hi], f.hi[f.lo < f.hi],
                              f.parent[f.lo < f.hi]) for f in new]
            nested = all(np.all(a.lo >= b.lo) and np.all(a.hi <= b.hi) for a, b in zip(new, families))
        else:
            new = [_refine_axis(f, level, a, n, marg[a]) for a, f in enumerate(families)]
            nested = all(_nested(c, p) for c, p in zip(new, families))
        if any(f.cells.size == 0 for f in new):
            raise InvariantViolation(f"fat Cantor construction emptied out at level {level}")
        families = new
        history.append(families)
        levels.append(_level_record(families, n, level, tau, epsilon, R, bool(nested)))

    rng = np.random.default_rng(seed)
    kept = sample_kept_points(families, kept_count, rng)
    return CantorRealization(
        n=n, n0=n0, n_max=n_max, epsilon=epsilon, tau=tau, center=center, root_cube=root,
        twist_radius=R, levels=levels, families=history, kept_points=kept,
        measure_kept=levels[-1].measure_kept, measure_ball=root.volume,
    )
