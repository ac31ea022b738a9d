"""
Exception types shared across services.

Validation problems stay in the ValueError family so callers can keep
catching ValueError; numerical failures live under ArithmeticError.
"""
from typing import Optional


class ConfigError(ValueError):
    """Config file could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleScheduleError(ValueError):
    """Every state of a distribution was removed by a scheduling constraint."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to produce a trustworthy value."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message: str, error_estimate: float):
        self.error_estimate = error_estimate
        super().__init__(f"{message} (estimated error {error_estimate:.3e})")


class CovarianceError(NumericalError):
    """A covariance matrix turned out indefinite or singular."""


class InfeasibleSearchError(NumericalError):
    """The optimizer did not find a single feasible parameter point."""
