"""Exception hierarchy shared by the library and the command line driver."""


class HeisrectError(Exception):
    """Base class for all errors raised by heisrect."""

    exit_code = 3


class UsageError(HeisrectError, ValueError):
    """Bad arguments: arity mismatch, out-of-range parameters, malformed config."""

    exit_code = 2


class NumericalFailure(HeisrectError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""

    exit_code = 3


class InvariantViolation(HeisrectError):
    """A quantitative bound that the construction relies on was violated."""

    exit_code = 1
