"""Exception hierarchy.

Domain errors map to CLI exit code 1, budget stops to exit code 2.
"""


class TensorBoundsError(Exception):
    """Base class for domain errors."""


class DimensionMismatch(TensorBoundsError, ValueError):
    pass


class DegenerateForm(TensorBoundsError, ValueError):
    pass


class NotOneGeneric(TensorBoundsError):
    pass


class DimensionTooSmall(TensorBoundsError, ValueError):
    pass


class ZeroTensor(TensorBoundsError, ValueError):
    pass


class TemplateMismatch(TensorBoundsError):
    pass


class UnsupportedDegree(TensorBoundsError, ValueError):
    pass


class MissingDegree(TensorBoundsError, KeyError):
    pass


class NotConvergent(TensorBoundsError):
    pass


class ShapeError(TensorBoundsError, ValueError):
    pass


class ResourceBudgetExceeded(Exception):
    """Raised when an operation would exceed a configured entry/time budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
