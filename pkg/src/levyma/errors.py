"""Exception taxonomy shared across the package."""


class LevymaError(Exception):
    """Base class for all package errors."""


class ConfigError(LevymaError):
    """Invalid specification, configuration or argument."""


class ConditionViolationError(LevymaError):
    """A precondition of the asymptotic theory is not met for this input."""


class DegenerateSeriesError(ConditionViolationError):
    """A statistic is undefined because the input series is degenerate."""


class EstimatorDomainError(ConditionViolationError):
    """An estimator was evaluated outside its invertible domain."""


class NumericsError(LevymaError):
    """A quadrature or series-truncation budget could not certify the result."""
