"""Exception hierarchy shared by the library and the command line."""


class RadarcalError(Exception):
    """Base class for every error raised deliberately by radarcal."""


class ValidationError(RadarcalError, ValueError):
    """Input violates a documented contract (dimensions, ranges, preconditions)."""


class FormatError(ValidationError):
    """A file does not conform to its on-disk format."""


class DegenerateTrainingError(ValidationError):
    """Training data cannot determine a regression line."""


class UndefinedCorrelationError(ValidationError):
    """Pearson correlation is undefined because one input has zero variance."""
