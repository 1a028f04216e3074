"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain where an operation is defined."""


class BudgetExceeded(RuntimeError):
    """A numerical routine ran out of its evaluation budget.

    Only raised when the caller asks for strict behaviour; by default the
    routines return a result object flagged as not converged.
    """
