"""Exception hierarchy.

Errors that derive from :class:`ValidationError` mean the caller passed bad
parameters (the CLI maps them to exit code 2). Everything else derived from
:class:`XAxisError` is a runtime failure on otherwise valid input (exit 1).
"""


class XAxisError(Exception):
    """Base class for all package errors."""


class ValidationError(XAxisError, ValueError):
    """Invalid parameter or specification."""


class DataError(XAxisError):
    """Input data could not be read or is unusable."""


class SingularWeightError(XAxisError, ZeroDivisionError):
    """A singular kernel was evaluated at zero distance."""


class DegenerateWeightsError(XAxisError):
    """All weights for a query underflowed to zero."""

    def __init__(self, query, message=None):
        self.query = query
        super().__init__(message or f"degenerate weights: total weight underflowed to 0 at query point {query!r}")


class TuningError(XAxisError):
    """Parameter selection could not produce a usable result."""


class DegenerateVarianceError(TuningError):
    """A variance-based objective has a zero-variance denominator."""


class NonFiniteObjectiveError(XAxisError, FloatingPointError):
    """An objective returned NaN or infinity at an iterate."""
