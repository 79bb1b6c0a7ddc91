"""Bilipschitz parametrization machinery for intrinsic graphs in Heisenberg groups."""

from heisrect.errors import HeisrectError, InvariantViolation, NumericalFailure, UsageError
from heisrect.kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HeisrectError",
    "InvariantViolation",
    "NumericalFailure",
    "UsageError",
    "__version__",
]
