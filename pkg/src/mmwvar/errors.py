"""Exception hierarchy shared across the package."""


class MMWError(Exception):
    """Base class for all package errors."""


class SchemaError(MMWError):
    """Input file is missing a header or a required column."""


class DataError(MMWError):
    """Input data violates a value constraint (bad price, duplicate date, ...)."""


class SizeError(MMWError, ValueError):
    """Too few observations for the requested operation."""


class DomainError(MMWError, ValueError):
    """Argument outside the mathematical domain of a function."""


class DegenerateError(MMWError):
    """Sample has no spread (zero variance) or is otherwise degenerate."""


class ComponentCollapseError(DegenerateError):
    """A mixture component lost (almost) all of its weight."""


class LikelihoodError(MMWError):
    """Some observation has zero density under the model."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class AscentError(MMWError):
    """An EM iteration decreased the log-likelihood beyond numerical slack."""


class AlignmentError(MMWError):
    """Forecast and realized series are not aligned date-for-date."""


class FitFailureError(MMWError):
    """Every start of a fit failed; ``diagnostics`` lists why."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class BracketWarning(UserWarning):
    """A scalar solve hit its bracket edge and returned the endpoint."""
