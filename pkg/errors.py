"""
Exception hierarchy shared by the library and the CLI.

Each error carries the process exit code the CLI reports for it:
2 for validation problems, 3 for algorithmic failure, 4 for I/O.
"""


class PhaseKaczmarzError(Exception):
    """Base class for all library errors"""
    exit_code = 1
    error_code = 'INTERNAL_ERROR'


class InvalidParameterError(PhaseKaczmarzError, ValueError):
    """A parameter or input violates a documented precondition"""
    exit_code = 2
    error_code = 'INVALID_PARAMETER'


class InvalidDimensionError(InvalidParameterError):
    error_code = 'INVALID_DIMENSION'


class DimensionMismatchError(InvalidParameterError):
    error_code = 'DIMENSION_MISMATCH'


class InvalidSignalError(InvalidParameterError):
    error_code = 'INVALID_SIGNAL'


class DegenerateRowError(InvalidParameterError):
    error_code = 'DEGENERATE_ROW'


class EmptyMeasureError(InvalidParameterError):
    error_code = 'EMPTY_MEASURE'


class OutOfBasinError(InvalidParameterError):
    error_code = 'OUT_OF_BASIN'


class DegenerateInstanceError(InvalidParameterError):
    error_code = 'DEGENERATE_INSTANCE'


class NumericInputError(InvalidParameterError):
    error_code = 'NON_FINITE_INPUT'


class NoMajorityError(PhaseKaczmarzError):
    """No ensemble estimate has a majority of the trials inside its ball"""
    exit_code = 3
    error_code = 'NO_MAJORITY'

    def __init__(self, message, cluster_sizes=None):
        super().__init__(message)
        self.cluster_sizes = list(cluster_sizes or [])


class ArtifactIOError(PhaseKaczmarzError, OSError):
    exit_code = 4
    error_code = 'IO_ERROR'


class AmbiguousEigenvectorWarning(UserWarning):
    """Top two eigenvalues of the spectral matrix are numerically equal"""


class MetricUnavailableWarning(UserWarning):
    """A metric needs the hidden signal and the instance does not carry one"""


class ConvergenceWarning(UserWarning):
    """An iterative routine stopped at its iteration cap"""
