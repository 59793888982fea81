"""Exception types shared across the package.

Exit-code mapping used by the CLI: contract violations (including degenerate
inputs) exit 1, numerical failures exit 2.
"""


class ContractViolationError(ValueError):
    """An argument or call violates a documented precondition."""


class DegenerateInputError(ContractViolationError):
    """Input is technically well-formed but numerically degenerate (e.g. a zero row)."""


class NumericalFailureError(RuntimeError):
    """Training produced a non-finite value and was aborted."""
