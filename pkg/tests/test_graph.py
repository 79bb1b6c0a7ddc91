import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heisrect.group import dist, embed_w, group_mul, split
from heisrect.graph import (
    TranslatedSurface,
    check_holder_gradient,
    check_vertical_holder,
    cone_quotients,
    graph_map,
    graph_points,
    intrinsic_gradient,
    lip_estimate,
    linear_approx_quotients,
    normal,
    translate_fn,
    translated_params,
)
from heisrect.surfaces import BigolinVittone, Bump, Constant, make_surface, rescale

SURFACES = [
    ("constant", 1, {"c": 0.3}),
    ("bigolin-vittone", 1, {}),
    ("flag", 1, {}),
    ("bump", 1, {}),
    ("bump", 2, {"a": 0.2}),
    ("constant", 2, {"c": -0.1}),
]


def test_graph_map_examples():
    phi = Constant(1, 1.0)
    assert np.allclose(graph_points(phi, [2.0, 3.0]), [1.0, 2.0, 2.0])
    assert np.allclose(graph_points(Constant(1, 0.0), [2.0, 3.0]), [0.0, 2.0, 3.0])
    gp = graph_map(BigolinVittone(1), [0.0, 1.0])
    assert np.allclose(gp.p, [-4.0, 0.0, 1.0])


def test_translate_examples(rng):
    phi = BigolinVittone(1)
    w0 = np.array([0.2, 0.3])
    p = graph_points(phi, w0)
    assert translate_fn(phi, p, np.zeros(2)) == pytest.approx(0.0, abs=1e-15)
    c = Constant(1, 0.7)
    w = rng.uniform(-1, 1, (50, 2))
    assert np.allclose(translate_fn(c, np.array([0.7, 0.0, 0.0]), w), 0.0)


@pytest.mark.parametrize("kind,n,params", SURFACES)
def test_translated_surface_identities(kind, n, params, rng):
    phi = make_surface(kind, n, params)
    w0 = rng.uniform(-0.5, 0.5, (1000, 2 * n))
    w = rng.uniform(-0.5, 0.5, (1000, 2 * n))
    p = graph_points(phi, w0)
    lhs = graph_points(phi, translated_params(p, w))
    rhs = group_mul(p, graph_points(TranslatedSurface(phi, p), w))
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_gradient_examples():
    assert np.allclose(intrinsic_gradient(Constant(2, 0.4), np.zeros((3, 4))), 0.0)
    t = np.linspace(0.1, 1.0, 10)
    g = intrinsic_gradient(BigolinVittone(1), np.stack([np.zeros_like(t), t], -1))[:, 0]
    assert np.allclose(g, 12.0 * np.sqrt(t), rtol=1e-4)
    flag = make_surface("flag", 1, {"slope": 0.7})
    assert np.allclose(intrinsic_gradient(flag, [[0.2, 0.5], [-0.3, 1.0]]), 0.7, atol=1e-8)


def test_gradient_second_order():
    phi = Bump(2, a=0.2)
    w = np.array([[0.1, -0.2, 0.15, 0.05]])
    e1 = np.abs(intrinsic_gradient(phi, w, 1e-2) - intrinsic_gradient(phi, w, 1e-4))
    e2 = np.abs(intrinsic_gradient(phi, w, 5e-3) - intrinsic_gradient(phi, w, 1e-4))
    assert np.all(e2 <= 0.3 * e1 + 1e-10)


def test_normal_examples(rng):
    assert np.allclose(normal(Constant(1, 0.0), [0.0, 0.0]), [-1.0, 0.0])
    nu = normal(BigolinVittone(1), [0.0, 1.0])
    assert np.allclose(nu, np.array([-1.0, 12.0]) / np.sqrt(145.0), atol=1e-5)
    v = normal(Bump(2), rng.uniform(-0.5, 0.5, (100, 4)))
    assert np.allclose(np.linalg.norm(v, axis=-1), 1.0, atol=1e-12)
    assert np.all(v[:, 0] < 0)


def test_gradient_invariant_under_translation(rng):
    phi = Bump(1, a=0.2)
    w0 = rng.uniform(-0.3, 0.3, (200, 2))
    w = rng.uniform(-0.3, 0.3, (200, 2))
    p = graph_points(phi, w0)
    a = np.array([intrinsic_gradient(TranslatedSurface(phi, pi), wi) for pi, wi in zip(p, w)])
    b = intrinsic_gradient(phi, translated_params(p, w))
    assert np.max(np.abs(a - b)) <= 5 * 1e-10 + 1e-6


def test_lip_estimate(rng):
    assert lip_estimate(Constant(1, 0.5), rng.uniform(-1, 1, (50, 2))) == 0.0
    flag = make_surface("flag", 1, {"slope": 1.0})
    s = rng.uniform(-1, 1, (400, 2))
    a = lip_estimate(flag, s[:200])
    b = lip_estimate(flag, s)
    assert b >= a
    assert np.isfinite(b)
    assert abs(b - a) <= 0.05 * b


def test_cone_quotient_degenerate_pair():
    phi = Constant(1, 0.0)
    q = cone_quotients(phi, np.zeros((1, 2)), np.zeros((1, 2)))
    assert q.shape == (1,)


def test_holder_gradient_bv(rng):
    phi = BigolinVittone(1)
    base = np.stack([np.zeros(40), np.geomspace(1e-3, 1, 40)], -1)
    offs = np.stack([np.zeros(40), -base[:, 1] * 0.5], -1)
    h05 = check_holder_gradient(phi, 0.5, base, offs)
    assert np.isfinite(h05) and h05 < 100
    # the vertical regularity is what caps the exponent at 0.5: with 0.6 the quotient grows as gaps shrink
    gaps = np.geomspace(1e-12, 1e-4, 5)
    quot = [check_vertical_holder(phi, 0.6, np.zeros((1, 2)), np.array([g])) for g in gaps]
    assert quot[0] > quot[-1]
    assert check_vertical_holder(phi, 0.5, np.zeros((5, 2)), gaps) <= 4.0 + 1e-9
    assert check_holder_gradient(Constant(1, 0.0), 1.0, base, offs) == 0.0


def test_holder_gradient_rescale(rng):
    phi = BigolinVittone(1)
    r = 0.25
    base = np.stack([np.zeros(30), np.geomspace(0.05, 0.5, 30)], -1)
    offs = np.stack([np.zeros(30), 0.3 * base[:, 1]], -1)
    h = check_holder_gradient(phi, 0.5, base, offs)
    hr = check_holder_gradient(rescale(phi, r), 0.5, base / [r, r * r], offs / [r, r * r])
    assert hr == pytest.approx(r ** 0.5 * h, rel=0.1)


def test_vertical_holder(rng):
    w = rng.uniform(-0.9, 0.9, (300, 2))
    gaps = rng.uniform(-0.5, 0.5, 300)
    assert check_vertical_holder(Constant(1, 1.0), 0.5, w, gaps) == 0.0
    assert check_vertical_holder(make_surface("flag", 1), 1.0, w, gaps) == 0.0
    assert check_vertical_holder(BigolinVittone(1), 0.5, w, gaps) <= 4.0 + 1e-9


@pytest.mark.parametrize("kind,alpha", [("bump", 1.0), ("bigolin-vittone", 0.5)])
def test_linear_approximation_slope(kind, alpha):
    phi = make_surface(kind, 1)
    base = np.array([[0.1, 0.3]])
    r = np.geomspace(1e-3, 1e-1, 12)
    offs = np.stack([0.6 * r, 0.4 * r * r], -1)
    num, quot = linear_approx_quotients(phi, alpha, np.repeat(base, 12, 0), offs)
    slope = np.polyfit(np.log(r), np.log(num), 1)[0]
    assert slope >= 1 + alpha - 0.1
    assert np.all(np.isfinite(quot))


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_base_point_on_translated_graph(y, t):
    phi = Bump(1, a=0.3)
    p = graph_points(phi, np.array([y, t]))
    assert abs(translate_fn(phi, p, np.zeros(2))) <= 1e-12
    w, x1 = split(p)
    assert dist(group_mul(embed_w(w), np.array([x1, 0, 0])), p) <= 1e-7
