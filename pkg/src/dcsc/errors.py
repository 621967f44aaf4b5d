"""Exception hierarchy shared by all dcsc modules."""


class DCSCError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(DCSCError, ValueError):
    """Array shapes are inconsistent with each other."""


class ValidationError(DCSCError, ValueError):
    """Input data violates a content invariant (e.g. non-finite values)."""


class ParameterError(DCSCError, ValueError):
    """A scalar parameter is outside its admissible range."""


class FormatError(DCSCError, ValueError):
    """A file does not follow the expected on-disk layout.

    Attributes
    ----------
    offset : int or None
        Byte offset at which the problem was detected.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = "%s (at byte offset %d)" % (message, offset)
        super().__init__(message)
        self.offset = offset


class SolverError(DCSCError, RuntimeError):
    """An iterative solver failed to converge or produced non-finite state.

    Attributes
    ----------
    residual : float or None
        Final relative residual reached before giving up, if known.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
