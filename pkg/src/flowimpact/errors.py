"""Exception types shared across the package.

Estimation failures inside the panel protocol are recorded, never fatal;
these classes carry enough context for the exclusion report to say why a
window was dropped.
"""

from __future__ import annotations

__all__ = [
    "FlowImpactError",
    "InputFormatError",
    "CrossedBookError",
    "DegenerateWindowError",
    "InsufficientSampleError",
    "OrderConditionError",
    "RankConditionError",
    "IdentificationError",
    "ConvergenceError",
    "BoundaryError",
    "CollinearityError",
    "ConfigError",
]


class FlowImpactError(Exception):
    """Base class for all package-specific errors."""


class InputFormatError(FlowImpactError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CrossedBookError(InputFormatError):
    """Best ask at or below best bid; names the offending sequence number."""


class DegenerateWindowError(FlowImpactError):
    """Constant or collinear series make the least-squares problem singular."""


class InsufficientSampleError(FlowImpactError):
    """Too few observations for the requested fit or state partition."""


class OrderConditionError(FlowImpactError):
    """Fewer than two volatility states: the structural system is underidentified."""


class RankConditionError(FlowImpactError):
    """Covariance shifts across states are too close to proportional."""


class IdentificationError(FlowImpactError):
    """No admissible structural solution; carries the candidate roots."""

    def __init__(self, message: str, roots=()):
        self.roots = tuple(roots)
        super().__init__(message)


class ConvergenceError(FlowImpactError):
    """Optimizer failed to converge after all restarts; carries best objective."""

    def __init__(self, message: str, best_objective: float | None = None):
        self.best_objective = best_objective
        super().__init__(message)


class BoundaryError(FlowImpactError):
    """A shock volatility was driven to the zero boundary during estimation."""


class CollinearityError(FlowImpactError):
    """Rank-deficient regressor matrix; names the dependent columns."""

    def __init__(self, message: str, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class ConfigError(FlowImpactError):
    """Invalid configuration value or unparseable config file."""
