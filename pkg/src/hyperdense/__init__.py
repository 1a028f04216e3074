"""Hyperbolic densities, Teichmüller-type extremal fields and convergence rates."""

from .errors import BudgetExceeded, DomainError

__version__ = "0.1.0"

__all__ = ["BudgetExceeded", "DomainError", "__version__"]
