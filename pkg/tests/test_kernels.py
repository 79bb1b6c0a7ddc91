import numpy as np
import pytest

from heisrect import kernels
from heisrect.group import dist, group_mul

BACKENDS = sorted(kernels.backends())


@pytest.mark.parametrize("name", BACKENDS)
@pytest.mark.parametrize("n", [1, 2, 3])
def test_backend_matches_reference(name, n, rng):
    impl = kernels.backends()[name]
    p = rng.uniform(-2, 2, (300, 2 * n + 1))
    q = rng.uniform(-2, 2, (300, 2 * n + 1))
    assert np.allclose(kernels.mul(p, q, n, impl), group_mul(p, q), atol=1e-14)
    assert np.allclose(kernels.dist(p, q, n, impl), dist(p, q), rtol=1e-13)
    assert np.allclose(kernels.dist(p[0], q, n, impl), dist(p[0], q), rtol=1e-13)


@pytest.mark.parametrize("name", BACKENDS)
def test_argmin_first_index_wins(name):
    impl = kernels.backends()[name]
    z = np.zeros(3)
    pts = np.array([[1.0, 0, 0], [0.5, 0, 0], [-0.5, 0, 0], [0.5, 0, 0]])
    i, d = kernels.argmin_dist(z, pts, 1, impl)
    assert i == 1 and d == pytest.approx(0.5)


def test_backends_agree_bitwise_on_norm(rng):
    found = kernels.backends()
    if len(found) < 2:
        pytest.skip("compiled backend not built")
    p = rng.normal(size=(1000, 5))
    a = kernels.norm(p, 2, found["python"])
    b = kernels.norm(p, 2, found["cython"])
    assert np.allclose(a, b, rtol=1e-15)


def test_compiled_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
