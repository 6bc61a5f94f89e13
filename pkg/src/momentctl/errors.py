"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the command runner can
translate failures without a lookup table.
"""


class MomentError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ContractError(MomentError, ValueError):
    """A precondition or data contract was violated (exit 2)."""

    exit_code = 2


class DomainError(ContractError):
    pass


class DegenerateWindowError(ContractError):
    pass


class ShapeError(ContractError):
    pass


class ResolutionError(ContractError):
    pass


class CapacityError(ContractError):
    pass


class GroupingError(ContractError):
    pass


class OrderingError(ContractError):
    pass


class DegeneracyError(ContractError):
    pass


class TruncationError(ContractError):
    pass


class DependencyError(ContractError):
    pass


class NumericError(MomentError, ArithmeticError):
    """Non-convergence of an iterative or quadrature routine (exit 3)."""

    exit_code = 3

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConditioningError(NumericError):
    """Matrix condition estimate above the configured guard (exit 3)."""

    def __init__(self, message, cond=None, guard=None):
        super().__init__(message)
        self.cond = cond
        self.guard = guard


class RankError(ConditioningError):
    """Matrix is singular to working precision."""


class ApproximateControllabilityError(MomentError):
    """Structural loss of approximate controllability (exit 4)."""

    exit_code = 4


class DistinctnessError(ApproximateControllabilityError):
    """Two eigenvalue sequences share a value."""
