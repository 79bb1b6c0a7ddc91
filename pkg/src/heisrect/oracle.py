"""Correspondence oracles: scale-indexed maps i^n_{x -> p} from G into a surface.

An oracle builds a target point p . T_p(x^-1 v) next to the surface, where T_p
is a bilipschitz model map fixed by the base point p, and returns the nearest
surface point to the target.  The value depends on (x, v) only through
x^-1 v because that product is formed first.

Nearest points at scale n are computed to the tolerance tol 2^(-n(1+alpha)), so
the additive defect they introduce is at most 2 tol in units of 2^(-n(1+alpha)).
"""

import numpy as np

from heisrect.errors import UsageError
from heisrect.graph import graph_points
from heisrect.group import group_index, group_mul, model_inv, model_mul
from heisrect.nearest import nearest_point_batch


class CorrespondenceOracle:
    """Base class; subclasses implement ``model_map(p, u)`` for model points u."""

    kind = "abstract"

    def __init__(self, phi, tol, declared_L, declared_A, declared_alpha):
        if not tol > 0:
            raise UsageError("nearest-point tolerance must be positive")
        self.phi = phi
        self.n = phi.n
        self.tol = float(tol)
        self.declared_L = float(declared_L)
        self.declared_A = float(declared_A)
        self.declared_alpha = float(declared_alpha)

    def tolerance(self, level):
        return self.tol * 2.0 ** (-level * (1.0 + self.declared_alpha))

    def model_map(self, p, u):
        """T_p(u) as H^n points, batched over rows of p and u."""
        raise NotImplementedError

    def _prepare(self, x, p, v):
        x = np.asarray(x, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if group_index(p) != self.n or x.shape[-1] != 2 * self.n or v.shape[-1] != 2 * self.n:
            raise UsageError("oracle arguments have the wrong arity")
        u = model_mul(model_inv(x), v)
        shape = np.broadcast_shapes(u.shape[:-1], p.shape[:-1])
        u = np.broadcast_to(u, shape + u.shape[-1:]).reshape(-1, 2 * self.n)
        p = np.broadcast_to(p, shape + p.shape[-1:]).reshape(-1, 2 * self.n + 1)
        return p, u, shape

    def target(self, level, x, p, v):
        """p . T_p(x^-1 v), the point whose nearest surface point is returned."""
        p, u, shape = self._prepare(x, p, v)
        z = group_mul(p, self.model_map(p, u))
        return z.reshape(shape + (2 * self.n + 1,))

    def eval(self, level, x, p, v):
        """i^level_{x -> p}(v), batched over leading axes."""
        z = self.target(level, x, p, v)
        shape = z.shape[:-1]
        flat = z.reshape(-1, 2 * self.n + 1)
        w, _ = nearest_point_batch(self.phi, flat, self.tolerance(level))
        return graph_points(self.phi, w).reshape(shape + (2 * self.n + 1,))

    __call__ = eval

    def describe(self):
        return {
            "kind": self.kind, "tol": self.tol, "declared_L": self.declared_L,
            "declared_A": self.declared_A, "declared_alpha": self.declared_alpha,
        }
