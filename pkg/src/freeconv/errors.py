"""Exception hierarchy shared by all freeconv modules."""


class FreeConvError(Exception):
    """Base class for every error raised by freeconv."""


class SpecError(FreeConvError, ValueError):
    """A measure spec or run configuration is malformed.

    ``field`` points at the offending entry, e.g. ``components[1].measure.atoms``.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class DegenerateMeasureError(FreeConvError, ValueError):
    """The measure is a point mass where a non-degenerate one is required."""


class UnsupportedMomentError(FreeConvError, ValueError):
    pass


class DomainError(FreeConvError, ValueError):
    """A transform was evaluated outside the region where it is defined."""


class NumericError(FreeConvError, ArithmeticError):
    """A numerical routine produced a value violating a hard invariant."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class InversionError(NumericError):
    """Newton continuation for an inverse transform did not converge."""


class ContinuationError(NumericError):
    """Path tracking of a subordination/inverse equation failed.

    ``failed`` holds the flat indices of target points that could not be reached.
    """

    def __init__(self, message, residual=None, failed=None):
        self.failed = failed
        super().__init__(message, residual)


class BoundaryError(ContinuationError):
    """The continuation path would have to leave the open upper half-plane."""


class CurveQualityError(NumericError):
    """Too many grid points of a density curve were left unresolved."""


class TailMassError(NumericError):
    """The density grid misses too much probability mass to build a CDF."""
