"""Exception types raised across the package."""


class MomentVarError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MomentVarError, ValueError):
    """Input data violates a documented precondition."""


class ParameterError(InvalidInputError):
    """Model or policy parameters are outside their valid domain."""


class DegenerateSampleError(InvalidInputError):
    """Sample has zero dispersion, so standardized statistics are undefined."""


class OutOfRangeError(InvalidInputError):
    """Requested point lies outside the range covered by the data."""


class SingularDesignError(InvalidInputError):
    """Regression design matrix is rank deficient."""


class MissingDataError(MomentVarError):
    """A required piece of bookkeeping was not recorded."""


class TruncationWarning(UserWarning):
    """Strike grid does not straddle the forward; integrals are one-sided."""
