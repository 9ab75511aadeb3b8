"""Exception types shared across the package."""


class MagnomechError(Exception):
    """Base class for all package errors."""


class ContractError(MagnomechError, ValueError):
    """Input violates a documented precondition (usually a dimension mismatch)."""


class NumericDomainError(MagnomechError, ArithmeticError):
    """A computation produced a non-finite value."""


class DegeneracyError(MagnomechError, ArithmeticError):
    """A matrix that must be invertible (or full rank) is numerically singular."""


class CompatibilityError(DegeneracyError):
    """The restricted two-form on a constraint distribution is degenerate."""


class IntegrationError(NumericDomainError):
    """Trajectory integration hit a non-finite state or an incompatible frame."""

    def __init__(self, message, step):
        super().__init__(f"{message} (step {step})")
        self.step = step


class ScenarioError(MagnomechError, ValueError):
    """Invalid scenario input; carries a location string for diagnostics."""

    def __init__(self, message, location=None):
        text = message if location is None else f"{location}: {message}"
        super().__init__(text)
        self.location = location
