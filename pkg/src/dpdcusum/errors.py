"""Exception types raised by analysis routines (mapped to CLI exit code 1)."""


class AnalysisError(Exception):
    """Base class for recoverable analysis failures."""


class DataError(AnalysisError):
    """Input data cannot be parsed or violates a precondition."""


class FitError(AnalysisError):
    """The objective minimizer failed on every start."""


class SingularMatrixError(AnalysisError):
    """A normalization matrix is singular beyond repair."""


class DegenerateStatisticError(AnalysisError):
    """A test statistic is undefined (e.g. zero residual variance)."""
