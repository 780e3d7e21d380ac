"""Exception hierarchy shared by the library and the CLI.

Every exception carries the process exit code the CLI maps it to.
"""


class KZQFIError(Exception):
    exit_code = 1


class InvalidArgumentError(KZQFIError, ValueError):
    """A parameter is outside its documented domain."""

    exit_code = 2


class InvalidInputError(KZQFIError, ValueError):
    """An input tensor/state violates a numerical precondition (non-finite, non-Hermitian, ...)."""

    exit_code = 2


class SchemaError(KZQFIError, ValueError):
    """A record file or config is missing a required field."""

    exit_code = 2


class InsufficientDataError(KZQFIError, ValueError):
    exit_code = 2


class SingularFitError(KZQFIError, ValueError):
    exit_code = 3


class NumericalFailureError(KZQFIError, ArithmeticError):
    exit_code = 3


class ConvergenceError(NumericalFailureError):
    """Iterative solver did not converge; ``trace`` holds the energies seen so far."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class BudgetExceededError(KZQFIError):
    exit_code = 4


class CapacityError(KZQFIError):
    """Requested system is too large for a dense engine."""

    exit_code = 5
