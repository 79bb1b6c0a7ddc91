"""Intrinsic graph data: functions phi on the vertical subgroup W.

A surface is a function phi: W -> R, evaluated on W-arrays (x_2, ..., x_2n, t)
with arbitrary leading batch axes.  Each surface carries declared regularity
constants (Hoelder exponent alpha, constant H, intrinsic Lipschitz constant L)
and a support radius outside of which it equals its base value.

Built-in kinds: ``constant``, ``bigolin-vittone``, ``flag``, ``bump``,
``tabulated``; ``rescale`` builds the zoomed function (1/r) phi(delta_r w).
"""

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from heisrect.errors import UsageError
from heisrect.group import dilate_w


def _smoothstep_cutoff(r):
    """C^2 cutoff: 1 on [0, 1], 0 on [2, inf), quintic in between."""
    x = np.clip(r - 1.0, 0.0, 1.0)
    return 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)


class SurfaceFn:
    """Base class; subclasses implement ``_value`` on float arrays."""

    kind = "abstract"

    def __init__(self, n, declared_alpha, declared_H, declared_L, support_radius):
        if int(n) != n or n < 1:
            raise UsageError(f"group index must be a positive integer, got {n}")
        if not 0 < declared_alpha <= 1:
            raise UsageError(f"declared alpha must lie in (0, 1], got {declared_alpha}")
        if not (declared_H > 0 and declared_L > 0 and support_radius > 0):
            raise UsageError("declared H, L and support radius must be positive")
        self.n = int(n)
        self.declared_alpha = float(declared_alpha)
        self.declared_H = float(declared_H)
        self.declared_L = float(declared_L)
        self.support_radius = float(support_radius)

    def value(self, w):
        w = np.asarray(w, dtype=np.float64)
        if w.shape[-1] != 2 * self.n:
            raise UsageError(
                f"surface over W in H^{self.n} expects {2 * self.n} coordinates, got {w.shape[-1]}"
            )
        return self._value(w)

    __call__ = value

    def _value(self, w):
        raise NotImplementedError

    @property
    def sup_abs(self):
        """An upper bound for |phi| over W."""
        raise NotImplementedError

    def params(self):
        return {}

    def describe(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "params": self.params(),
            "declared_alpha": self.declared_alpha,
            "declared_H": self.declared_H,
            "declared_L": self.declared_L,
            "support_radius": self.support_radius,
        }


class Constant(SurfaceFn):
    kind = "constant"

    def __init__(self, n, c=0.0, declared_alpha=1.0, declared_H=1.0, declared_L=1.0,
                 support_radius=1.0):
        super().__init__(n, declared_alpha, declared_H, declared_L, support_radius)
        self.c = float(c)

    def _value(self, w):
        return np.full(w.shape[:-1], self.c)

    @property
    def sup_abs(self):
        return abs(self.c)

    def params(self):
        return {"c": self.c}


class BigolinVittone(SurfaceFn):
    """phi(y, t) = -t^a / (1 - a) for t >= 0 and 0 for t < 0, times a C^2 cutoff.

    The cutoff equals 1 where |y| <= window and |t| <= window and vanishes once
    either exceeds twice the window.  Its intrinsic gradient on the inner window
    is a/(1-a)^2 * t^(2a-1) in the x_{n+1} direction.
    """

    kind = "bigolin-vittone"

    def __init__(self, n, a=0.75, window=1.0, declared_alpha=None, declared_H=None,
                 declared_L=None):
        if not 0.5 < a < 1:
            raise UsageError(f"exponent must lie in (1/2, 1), got {a}")
        if not window > 0:
            raise UsageError("window must be positive")
        self.a = float(a)
        self.window = float(window)
        super().__init__(
            n,
            2 * a - 1 if declared_alpha is None else declared_alpha,
            1.0 / (1.0 - a) if declared_H is None else declared_H,
            self.gradient_coefficient * (2 * window) ** (2 * a - 1) + 1.0
            if declared_L is None else declared_L,
            4.0 * window,
        )

    @property
    def gradient_coefficient(self):
        return self.a / (1.0 - self.a) ** 2

    def _value(self, w):
        t = w[..., -1]
        core = -np.power(np.maximum(t, 0.0), self.a) / (1.0 - self.a)
        y = np.sqrt(np.sum(w[..., :-1] ** 2, axis=-1))
        cut = _smoothstep_cutoff(np.abs(t) / self.window) * _smoothstep_cutoff(y / self.window)
        return core * cut

    @property
    def sup_abs(self):
        return (2 * self.window) ** self.a / (1.0 - self.a)

    def params(self):
        return {"a": self.a, "window": self.window}


class FlagProfile:
    """A piecewise-linear Lipschitz function of one variable, constant past its knots."""

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if knots.ndim != 1 or knots.shape != values.shape or knots.size < 2:
            raise UsageError("flag profile needs matching 1-D knot and value lists (>= 2 knots)")
        if np.any(np.diff(knots) <= 0):
            raise UsageError("flag profile knots must be strictly increasing")
        self.input_knots = knots
        self.input_values = values
        # 0 is kept as a knot so primitives are anchored there without cancellation
        if knots[0] < 0.0 < knots[-1] and 0.0 not in knots:
            k = int(np.searchsorted(knots, 0.0))
            values = np.insert(values, k, np.interp(0.0, knots, values))
            knots = np.insert(knots, k, 0.0)
        self.knots = knots
        self.values = values
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(knots))])
        self._cum = cum - np.interp(0.0, knots, cum) if knots[0] <= 0.0 <= knots[-1] else cum

    @classmethod
    def linear(cls, slope, extent=1e6):
        return cls([-extent, extent], [-slope * extent, slope * extent])

    def __call__(self, y):
        return np.interp(y, self.knots, self.values)

    @property
    def lipschitz(self):
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.knots))))

    def _primitive(self, y):
        """A primitive of the profile, exact for the piecewise-linear profile."""
        y = np.asarray(y, dtype=np.float64)
        kn, va = self.knots, self.values
        yc = np.clip(y, kn[0], kn[-1])
        k = np.clip(np.searchsorted(kn, yc, side="right") - 1, 0, kn.size - 2)
        v = self(yc)
        # integrate from the nearer end of the segment to limit cancellation
        from_left = self._cum[k] + 0.5 * (va[k] + v) * (yc - kn[k])
        from_right = self._cum[k + 1] - 0.5 * (va[k + 1] + v) * (kn[k + 1] - yc)
        inside = np.where(yc - kn[k] <= kn[k + 1] - yc, from_left, from_right)
        left = np.minimum(y - kn[0], 0.0) * va[0]
        right = np.maximum(y - kn[-1], 0.0) * va[-1]
        return inside + left + right

    def integral(self, y):
        """Integral of the profile from 0 to y (cumulative trapezoid over the knots)."""
        return self._primitive(y) - self._primitive(0.0)


class Flag(SurfaceFn):
    """A Lipschitz flag in H^1: phi(y, t) = psi(y), independent of t."""

    kind = "flag"

    def __init__(self, n, profile, declared_alpha=1.0, declared_H=1.0, declared_L=None,
                 support_radius=None):
        if n != 1:
            raise UsageError("flag surfaces are defined in H^1 only")
        if not isinstance(profile, FlagProfile):
            profile = FlagProfile(*profile)
        self.profile = profile
        extent = float(np.max(np.abs(profile.knots)))
        super().__init__(
            n,
            declared_alpha,
            declared_H,
            max(profile.lipschitz, 1e-12) if declared_L is None else declared_L,
            extent if support_radius is None else support_radius,
        )

    def _value(self, w):
        return self.profile(w[..., 0])

    @property
    def sup_abs(self):
        return float(np.max(np.abs(self.profile.values)))

    def params(self):
        return {"knots": self.profile.input_knots.tolist(), "values": self.profile.input_values.tolist()}


class Bump(SurfaceFn):
    """phi(w) = a exp(1 - 1/(1 - |w|^2/s^2)) inside the Euclidean ball of radius s."""

    kind = "bump"

    def __init__(self, n, a=0.1, s=1.0, center=None, declared_alpha=1.0, declared_H=None,
                 declared_L=None):
        if not s > 0:
            raise UsageError("bump radius must be positive")
        self.a = float(a)
        self.s = float(s)
        self.center = np.zeros(2 * n) if center is None else np.asarray(center, dtype=np.float64)
        if self.center.shape != (2 * n,):
            raise UsageError(f"bump center must have {2 * n} coordinates")
        super().__init__(
            n,
            declared_alpha,
            10.0 * abs(a) / s ** 2 + 1e-12 if declared_H is None else declared_H,
            3.0 * abs(a) / s + 1e-12 if declared_L is None else declared_L,
            s + float(np.linalg.norm(self.center)),
        )

    def _value(self, w):
        r2 = np.sum((w - self.center) ** 2, axis=-1) / self.s ** 2
        inside = r2 < 1.0
        safe = np.where(inside, r2, 0.0)
        return np.where(inside, self.a * np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0)

    @property
    def sup_abs(self):
        return abs(self.a)

    def params(self):
        return {"a": self.a, "s": self.s, "center": self.center.tolist()}


class Tabulated(SurfaceFn):
    """Multilinear interpolation of values on a rectilinear grid over W; 0 outside."""

    kind = "tabulated"

    def __init__(self, n, axes, values, declared_alpha, declared_H, declared_L,
                 support_radius=None):
        axes = [np.asarray(a, dtype=np.float64) for a in axes]
        values = np.asarray(values, dtype=np.float64)
        if len(axes) != 2 * n or values.shape != tuple(a.size for a in axes):
            raise UsageError(f"tabulated surface in H^{n} needs {2 * n} axes matching the value grid")
        self.axes = axes
        self.grid_values = values
        self._interp = RegularGridInterpolator(axes, values, bounds_error=False, fill_value=0.0)
        radius = float(np.sqrt(sum(max(abs(a[0]), abs(a[-1])) ** 2 for a in axes)))
        super().__init__(n, declared_alpha, declared_H, declared_L,
                         radius if support_radius is None else support_radius)

    def _value(self, w):
        flat = w.reshape(-1, w.shape[-1])
        return self._interp(flat).reshape(w.shape[:-1])

    @property
    def sup_abs(self):
        return float(np.max(np.abs(self.grid_values)))

    def params(self):
        return {"axes": [a.tolist() for a in self.axes], "values": self.grid_values.tolist()}


class Rescaled(SurfaceFn):
    """The zoomed function (1/r) phi(delta_r w); its graph is delta_{1/r} of the original."""

    kind = "rescaled"

    def __init__(self, base, r):
        if not r > 0:
            raise UsageError(f"rescaling factor must be positive, got {r}")
        self.base = base
        self.r = float(r)
        super().__init__(
            base.n,
            base.declared_alpha,
            r ** base.declared_alpha * base.declared_H,
            base.declared_L,
            base.support_radius / r,
        )

    def _value(self, w):
        return self.base.value(dilate_w(w, self.r)) / self.r

    @property
    def sup_abs(self):
        return self.base.sup_abs / self.r

    def params(self):
        return {"base": self.base.describe(), "r": self.r}


class FunctionGraph(SurfaceFn):
    """Wrap an arbitrary vectorized callable on W-arrays as a surface."""

    kind = "function"

    def __init__(self, n, fn, sup_abs, declared_alpha=1.0, declared_H=1.0, declared_L=1.0,
                 support_radius=1.0):
        super().__init__(n, declared_alpha, declared_H, declared_L, support_radius)
        self._fn = fn
        self._sup = float(sup_abs)

    def _value(self, w):
        return np.asarray(self._fn(w), dtype=np.float64)

    @property
    def sup_abs(self):
        return self._sup


def rescale(phi, r):
    """Return phi_r(w) = phi(delta_r w) / r with declared H scaled by r^alpha."""
    if not r > 0:
        raise UsageError(f"rescaling factor must be positive, got {r}")
    if r == 1:
        return phi
    if isinstance(phi, Constant):
        return Constant(phi.n, phi.c / r, phi.declared_alpha,
                        r ** phi.declared_alpha * phi.declared_H, phi.declared_L,
                        phi.support_radius / r)
    return Rescaled(phi, r)


_REGISTRY = {
    "constant": Constant,
    "bigolin-vittone": BigolinVittone,
    "bump": Bump,
}


def make_surface(kind, n, params=None):
    """Build a surface from a registry name and a parameter mapping."""
    params = dict(params or {})
    rescale_by = params.pop("rescale", None)
    try:
        if kind in _REGISTRY:
            phi = _REGISTRY[kind](n, **params)
        elif kind == "flag":
            knots = params.pop("knots", None)
            values = params.pop("values", None)
            slope = params.pop("slope", None)
            if slope is not None:
                profile = FlagProfile.linear(slope)
            elif knots is not None and values is not None:
                profile = FlagProfile(knots, values)
            else:
                profile = FlagProfile([-1.0, -0.5, 0.0, 0.5, 1.0], [0.0, 0.5, 0.0, 0.5, 0.0])
            phi = Flag(n, profile, **params)
        elif kind == "tabulated":
            missing = {"axes", "values", "declared_alpha", "declared_H", "declared_L"} - params.keys()
            if missing:
                raise UsageError(f"tabulated surface requires {sorted(missing)}")
            phi = Tabulated(n, **params)
        else:
            raise UsageError(f"unknown surface kind {kind!r}")
    except TypeError as exc:
        raise UsageError(f"bad parameters for surface {kind!r}: {exc}") from None
    if rescale_by is not None:
        phi = rescale(phi, float(rescale_by))
    return phi


SURFACE_KINDS = ("constant", "bigolin-vittone", "flag", "bump", "tabulated")
