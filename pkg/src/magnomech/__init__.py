"""Numerical toolkit for controlled magnetic Hamiltonian systems on T*R^n."""

from .errors import (
    CompatibilityError,
    ContractError,
    DegeneracyError,
    IntegrationError,
    MagnomechError,
    NumericDomainError,
    ScenarioError,
)

__version__ = "0.1.0"

__all__ = [
    "CompatibilityError",
    "ContractError",
    "DegeneracyError",
    "IntegrationError",
    "MagnomechError",
    "NumericDomainError",
    "ScenarioError",
    "__version__",
]
