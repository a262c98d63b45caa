"""Exception types shared across the package."""


class SlowBondError(Exception):
    """Base class for all package errors."""


class DomainError(SlowBondError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class UsageError(SlowBondError, ValueError):
    """An operation was called in a way its contract does not allow."""


class NumericError(SlowBondError, ArithmeticError):
    """A numerical routine (quadrature, linear algebra) failed to converge."""


class ResourceLimitError(SlowBondError, RuntimeError):
    """A hard size or event budget would be exceeded."""


class EventBudgetExceeded(ResourceLimitError):
    """A trajectory needed more events than its budget allows."""

    def __init__(self, message, *, run_id=None, events=None, budget=None):
        super().__init__(message)
        self.run_id = run_id
        self.events = events
        self.budget = budget


class ConsistencyError(SlowBondError, AssertionError):
    """Two independent computations of the same quantity disagree.

    This signals an implementation bug, never bad input data.
    """


class ValidationError(SlowBondError, ValueError):
    """An experiment config violates a hypothesis of the limit theorems."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))
