"""Exception hierarchy shared by all modules.

Validation problems derive from :class:`ConfigError` (CLI exit code 2);
numerical breakdowns derive from :class:`NumericalError` (exit code 3).
"""


class SingdiffError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(SingdiffError, ValueError):
    """Invalid configuration or argument."""


class DomainError(ConfigError):
    """A parameter lies outside the domain where an operation is defined."""


class InadmissibleDriftError(ConfigError):
    """A drift fails its analytic admissibility condition."""


class DimensionError(ConfigError):
    """Input dimension does not match what the operation supports."""


class DegenerateSystemError(ConfigError):
    """Too few particles or symbols for the requested interaction order."""


class EnumerationBudgetError(ConfigError):
    """Exact enumeration would exceed the configured size budget."""


class UnsupportedFamilyError(ConfigError):
    """The operation is not available for this drift family."""


class IllNormalizedMeasureError(ConfigError):
    """Weights of a path measure are too far from a probability density."""


class NumericalError(SingdiffError, ArithmeticError):
    """A computation produced unusable numbers."""


class SingularEvaluationError(NumericalError):
    """A singular kernel was evaluated at its singularity."""


class BlowUpError(NumericalError):
    """A simulated state became non-finite."""

    def __init__(self, step, message=None):
        self.step = int(step)
        super().__init__(message or f"non-finite state at step {self.step}")


class WeightCollapseError(NumericalError):
    """Importance weights degenerated (effective sample size too small)."""

    def __init__(self, ess, size):
        self.ess = float(ess)
        self.size = int(size)
        super().__init__(
            f"effective sample size {self.ess:.1f} below 1% of {self.size} paths"
        )
