"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Input array shapes are incompatible with the requested operation."""


class StabilityError(ValueError):
    """A model or matrix violates the spectral-radius / operator-norm < 1 requirement."""


class NumericError(RuntimeError):
    """An iterative routine failed to converge. Carries the best estimate so far."""

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class UnsupportedDistributionError(ValueError):
    """The requested distribution family is not supported by this operation."""


class DegenerateColumnError(RuntimeError):
    """A design column with zero Gram diagonal has a nonzero correlation with the response."""


class BudgetError(RuntimeError):
    """Exact support enumeration would exceed the allowed budget; use randomized mode."""


class SampleSizeError(ValueError):
    """Sample size below the analytic threshold. Carries the required T."""

    def __init__(self, message, required_T=None):
        super().__init__(message)
        self.required_T = required_T
