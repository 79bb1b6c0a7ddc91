import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisrect.cubes import (
    Cube,
    CubeIndex,
    axis_sides,
    build_fat_cantor,
    cube_of_point,
    dist_lower_bound_to_complement,
    level_loss_bound,
    predicted_measure,
    prune_boundary,
    vertical_bound,
)
from heisrect.errors import UsageError
from heisrect.group import model_dist


def test_cube_of_point_examples():
    assert cube_of_point(np.zeros(2), 3) == CubeIndex(3, (0, 0))
    assert cube_of_point(np.array([0.3, 0.05]), 1) == CubeIndex(1, (2, 3))
    with pytest.raises(UsageError):
        cube_of_point(np.array([2.0, 0.0]), 1)


@given(st.integers(1, 3), st.integers(1, 8), st.integers(0, 2 ** 31))
def test_cube_contains_point_and_parent_consistent(n, level, seed):
    g = np.random.default_rng(seed).uniform(-0.9, 0.9, 2 * n)
    idx = cube_of_point(g, level)
    assert Cube.from_index(idx, n).contains(g)
    assert idx.parent(n) == cube_of_point(g, level - 1)


@pytest.mark.parametrize("n", [1, 2])
def test_children_partition_parent(n):
    parent = Cube.from_index(CubeIndex(2, tuple([1] * (2 * n))), n)
    kids = parent.children()
    assert len(kids) == 2 ** (2 * n - 1) * 4
    assert sum(k.volume for k in kids) == pytest.approx(parent.volume, rel=1e-12)
    assert all(k.index.parent(n) == parent.index for k in kids)


def test_vertical_face_bound_parabolic():
    assert vertical_bound(0.01, 1, 0.0) == pytest.approx(0.2, abs=1e-15)
    sides = axis_sides(1, 0)
    cube = Cube.from_index(CubeIndex(0, (0, 0)), 1)
    q = np.array([0.5 * sides[0], sides[1] - 0.01])
    assert dist_lower_bound_to_complement(q, cube) == pytest.approx(min(0.5 * sides[0], 0.2))


def test_point_on_face_has_zero_bound():
    cube = Cube.from_index(CubeIndex(1, (0, 0, 0, 0)), 2)
    q = cube.lower.copy()
    q[1:] += 0.5 * (cube.upper - cube.lower)[1:]
    assert dist_lower_bound_to_complement(q, cube) == 0.0


def _face_samples(cube, count, rng):
    """Points sampled on every face of the cube box."""
    d = cube.lower.size
    out = []
    for axis in range(d):
        for side in (cube.lower[axis], cube.upper[axis]):
            pts = rng.uniform(cube.lower, cube.upper, size=(count, d))
            pts[:, axis] = side
            out.append(pts)
    return np.concatenate(out)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_complement_bound_sound_against_face_sampling(n, rng):
    for level in (1, 3):
        idx = cube_of_point(rng.uniform(-0.5, 0.5, 2 * n), level)
        cube = Cube.from_index(idx, n)
        faces = _face_samples(cube, 4000, rng)
        for q in rng.uniform(cube.lower, cube.upper, size=(20, 2 * n)):
            bound = dist_lower_bound_to_complement(q, cube, R=None)
            assert bound <= np.min(model_dist(q[None, :], faces)) + 1e-12


@pytest.mark.parametrize("n", [1, 2])
def test_prune_shrinks_to_cube_as_rho_vanishes(n):
    cube = Cube.from_index(CubeIndex(2, tuple([1] * (2 * n))), n)
    lo, hi = prune_boundary(cube, 1e-9)
    np.testing.assert_allclose(lo, cube.lower, atol=1e-10)
    np.testing.assert_allclose(hi, cube.upper, atol=1e-10)
    with pytest.raises(UsageError):
        prune_boundary(cube, 0.0)


def test_prune_margins_parabolic():
    cube = Cube.from_index(CubeIndex(0, (0, 0)), 1)
    lo, hi = prune_boundary(cube, 0.1)
    np.testing.assert_allclose(lo - cube.lower, [0.1, 0.01 / 4.0], rtol=1e-12)
    kept = np.prod(hi - lo) / cube.volume
    assert 1.0 - kept <= level_loss_bound(1, 0, 0.1, 0.0) + 1e-12


def test_core_points_are_certified(rng):
    cube = Cube.from_index(CubeIndex(1, (1, 1, 1, 1)), 2)
    rho = 0.05
    lo, hi = prune_boundary(cube, rho)
    faces = _face_samples(cube, 3000, rng)
    q = rng.uniform(lo, hi, size=(50, 4))
    d = np.min(model_dist(q[:, None, :], faces[None, :, :]), axis=1)
    assert np.all(d >= rho * 2.0 ** -1 - 1e-12)


def test_tau_zero_keeps_whole_root():
    cr = build_fat_cantor(np.array([0.01, 0.001]), 2, 6, 0.5, tau=0.0)
    assert cr.measure_kept == pytest.approx(cr.root_cube.volume, rel=1e-12)
    assert all(r.nested_ok for r in cr.levels)


def test_parabolic_cantor_keeps_half():
    cr = build_fat_cantor(np.array([0.01, 0.001]), 2, 12, 1.0, tau="auto")
    assert cr.kept_fraction >= 0.5
    assert all(r.separation_ok and r.nested_ok and r.diameter_ok for r in cr.levels)
    assert 1 < cr.levels[-1].cubes_alive <= 2 ** 10 * 4 ** 10


@pytest.mark.parametrize("n, depth", [(1, 10), (2, 8)])
def test_measure_matches_closed_form(n, depth):
    center = np.full(2 * n, 0.01)
    cr = build_fat_cantor(center, 2, 2 + depth, 0.5, tau="auto")
    pred = predicted_measure(n, 2, 2 + depth, cr.tau, cr.epsilon, cr.twist_radius)
    assert abs(cr.measure_kept / pred - 1.0) <= 0.05
    assert cr.kept_fraction >= 0.5
    loss = 1.0 - cr.kept_fraction
    bound = sum(r.loss_bound for r in cr.levels)
    assert loss <= bound + 1e-12


def test_kept_points_lie_in_final_families():
    cr = build_fat_cantor(np.array([0.01, 0.01, 0.01, 0.001]), 1, 6, 1.0, kept_count=300, seed=3)
    for a, fam in enumerate(cr.families[-1]):
        x = cr.kept_points[:, a]
        k = np.searchsorted(fam.lo, x, side="right") - 1
        assert np.all(k >= 0) and np.all(x <= fam.hi[k])


def test_cantor_deterministic():
    a = build_fat_cantor(np.array([0.01, 0.001]), 2, 8, 0.5, seed=7)
    b = build_fat_cantor(np.array([0.01, 0.001]), 2, 8, 0.5, seed=7)
    np.testing.assert_array_equal(a.kept_points, b.kept_points)


@settings(max_examples=20)
@given(st.floats(0.001, 0.1))
def test_separation_holds_for_any_tau(tau):
    cr = build_fat_cantor(np.array([0.01, 0.001]), 1, 7, 1.0, tau=tau)
    assert all(r.separation_ok for r in cr.levels)


def test_closed_form_exact_before_cells_empty():
    cr = build_fat_cantor(np.array([0.01, 0.01]), 2, 12, 0.5, tau=0.002)
    pred = predicted_measure(1, 2, 12, cr.tau, cr.epsilon, 0.0)
    assert cr.measure_kept == pytest.approx(pred, rel=1e-3)
