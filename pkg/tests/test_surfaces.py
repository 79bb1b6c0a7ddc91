import numpy as np
import pytest

from heisrect.errors import UsageError
from heisrect.surfaces import (
    SURFACE_KINDS,
    BigolinVittone,
    Constant,
    FlagProfile,
    Rescaled,
    make_surface,
    rescale,
)


def test_registry_builds_every_kind():
    for kind in SURFACE_KINDS:
        n = 1
        params = {}
        if kind == "tabulated":
            params = {"axes": [[-1, 0, 1], [-1, 1]], "values": [[0, 0], [1, 1], [0, 0]],
                      "declared_alpha": 1.0, "declared_H": 1.0, "declared_L": 1.0}
        phi = make_surface(kind, n, params)
        assert phi.value(np.zeros((3, 2))).shape == (3,)


def test_unknown_kind_and_bad_params():
    with pytest.raises(UsageError):
        make_surface("sphere", 1)
    with pytest.raises(UsageError):
        make_surface("bump", 1, {"radius": 2})
    with pytest.raises(UsageError):
        make_surface("flag", 2)
    with pytest.raises(UsageError):
        BigolinVittone(1, a=0.4)


def test_bigolin_vittone_values():
    phi = BigolinVittone(1)
    assert phi.value([0.0, 1.0]) == pytest.approx(-4.0)
    assert phi.value([0.3, -0.2]) == 0.0
    assert phi.declared_alpha == pytest.approx(0.5)
    # cutoff vanishes past twice the window
    assert phi.value([0.0, 2.5]) == 0.0


def test_flag_profile_integral_exact():
    prof = FlagProfile([-1.0, 0.0, 2.0], [1.0, -1.0, 3.0])
    y = np.linspace(-3, 4, 57)
    ref = np.array([np.trapezoid(prof(np.linspace(0, v, 20001)), np.linspace(0, v, 20001)) for v in y])
    assert np.allclose(prof.integral(y), ref, atol=1e-6)
    assert prof.lipschitz == pytest.approx(2.0)


def test_tabulated_bilinear():
    phi = make_surface("tabulated", 1, {"axes": [[0, 1], [0, 1]], "values": [[0, 1], [2, 3]],
                                        "declared_alpha": 1.0, "declared_H": 1.0, "declared_L": 1.0})
    assert phi.value([0.5, 0.5]) == pytest.approx(1.5)
    assert phi.value([5.0, 5.0]) == 0.0


def test_rescale_examples():
    phi = BigolinVittone(1)
    assert rescale(phi, 1.0) is phi
    c = rescale(Constant(1, 2.0), 4.0)
    assert isinstance(c, Constant) and c.c == pytest.approx(0.5)
    r = rescale(phi, 0.25)
    assert isinstance(r, Rescaled)
    assert r.declared_H == pytest.approx(0.25 ** 0.5 * phi.declared_H)
    w = np.array([0.3, 0.7])
    assert r.value(w) == pytest.approx(phi.value([0.075, 0.04375]) / 0.25)
    with pytest.raises(UsageError):
        rescale(phi, 0.0)


def test_rescale_from_params():
    phi = make_surface("bigolin-vittone", 1, {"rescale": 0.5})
    assert isinstance(phi, Rescaled) and phi.r == 0.5
