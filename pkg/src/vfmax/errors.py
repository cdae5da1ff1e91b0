"""Exception types shared across the package.

:class:`AuditFailure` marks a violated numerical assertion (an inequality that
must hold exactly); the CLI maps it to exit status 1.
"""


class AuditFailure(AssertionError):
    """An audited inequality failed; carries the witness in its message."""


class DegenerateProfileError(ValueError):
    """The angular profile vanishes identically (``sup w = 0``)."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RegimeError(ValueError):
    """A parameter lies outside the regime an estimate is stated for."""


class NumericalRangeError(ArithmeticError):
    """A root could not be bracketed in the representable range."""


class DivergentSeriesError(ValueError):
    """A weighted series diverges (e.g. sum 1/j**p with p <= 1)."""
