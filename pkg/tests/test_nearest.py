import numpy as np
import pytest

from heisrect import kernels
from heisrect.errors import UsageError
from heisrect.graph import graph_points
from heisrect.group import group_mul, split
from heisrect.nearest import (
    brute_force_nearest,
    certified_half_widths,
    coarse_points_per_axis,
    nearest_point,
    nearest_point_batch,
    shear,
)
from heisrect.surfaces import Bump, Constant, make_surface


def near_graph_queries(phi, count, rng, spread=0.05):
    w = rng.uniform(-0.4, 0.4, (count, 2 * phi.n))
    p = graph_points(phi, w)
    off = rng.uniform(-spread, spread, (count, 2 * phi.n + 1))
    off[:, -1] *= spread
    return group_mul(p, off)


def test_point_on_graph_has_zero_distance():
    phi = Bump(1, a=0.3)
    w = np.array([0.1, -0.2])
    wf, d = nearest_point(phi, graph_points(phi, w), tol=1e-10)
    assert d <= 1e-8
    assert np.allclose(graph_points(phi, wf), graph_points(phi, w), atol=1e-7)


@pytest.mark.parametrize("d", [0.5, -0.25, 1e-3])
def test_constant_plane_distance(d):
    _, dist = nearest_point(Constant(1, 0.0), np.array([d, 0.0, 0.0]), tol=1e-10)
    assert dist == pytest.approx(abs(d), abs=1e-8)


@pytest.mark.parametrize("kind", ["bigolin-vittone", "flag", "bump"])
def test_agrees_with_brute_force(kind, rng):
    phi = make_surface(kind, 1)
    z = near_graph_queries(phi, 30, rng)
    _, d = nearest_point_batch(phi, z, 1e-9)
    for zi, di in zip(z, d):
        # any graph point within r certifies the box; widen it so the best grid point fits too
        d0 = float(kernels.dist(zi, graph_points(phi, split(zi)[0]), 1))
        half = certified_half_widths(zi[None], np.array([1.05 * min(d0, di) + 1e-2]))[0]
        _, db = brute_force_nearest(phi, zi, half, 1e-3)
        assert di <= db + 1e-12
        assert db - di <= 2e-3


def test_agrees_with_brute_force_in_h2(rng):
    phi = make_surface("bump", 2, {"a": 0.3, "s": 0.6})
    z = near_graph_queries(phi, 12, rng)
    _, d = nearest_point_batch(phi, z, 1e-9)
    for zi, di in zip(z, d):
        half = certified_half_widths(zi[None], np.array([1.05 * di + 1e-2]))[0]
        _, db = brute_force_nearest(phi, zi, half, 5e-3)
        assert di <= db + 1e-12
        assert db - di <= 1e-2


def test_sheared_box_contains_minimizer(rng):
    phi = make_surface("flag", 1)
    z = near_graph_queries(phi, 20, rng)
    w, d = nearest_point_batch(phi, z, 1e-9)
    u_t = w[:, -1] - split(z)[0][:, -1] - shear(z, w - split(z)[0])
    assert np.all(np.abs(w[:, 0] - split(z)[0][:, 0]) <= d + 1e-9)
    assert np.all(np.abs(u_t) <= 0.75 * d * d + 1e-9)


def test_deterministic_and_seedless(rng):
    phi = Bump(2, a=0.2)
    z = near_graph_queries(phi, 3, rng)
    a = nearest_point_batch(phi, z, 1e-8)
    b = nearest_point_batch(phi, z, 1e-8)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_bad_window():
    with pytest.raises(UsageError):
        nearest_point(Constant(1, 0.0), np.zeros(3), window=-1.0)
    with pytest.raises(UsageError):
        nearest_point_batch(Constant(2, 0.0), np.zeros((1, 3)), 1e-6)


def test_coarse_grid_budget():
    assert coarse_points_per_axis(2) == 33
    assert coarse_points_per_axis(4) ** 4 <= 30_000
    assert coarse_points_per_axis(6) >= 5
