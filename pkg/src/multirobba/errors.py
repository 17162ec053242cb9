"""Exception hierarchy shared by every layer.

The CLI maps these to exit codes, so each class carries its own.
"""


class RobbaError(Exception):
    exit_code = 1


class InvalidArgumentError(RobbaError, ValueError):
    exit_code = 2


class ParseError(InvalidArgumentError):
    exit_code = 2


class RegimeError(RobbaError):
    """Raised when an operation is outside the radius regime where it converges."""

    exit_code = 3


class InvalidRadiusError(RegimeError, ValueError):
    exit_code = 3


class NotInvertibleInRegimeError(RegimeError):
    exit_code = 3


class NoConvergenceError(RegimeError):
    exit_code = 3


class PrecisionError(RobbaError):
    exit_code = 4


class IndeterminateRankError(PrecisionError):
    exit_code = 4


class IndeterminateResidueError(PrecisionError):
    exit_code = 4


class TailContaminationError(PrecisionError):
    exit_code = 4


class ValidationError(RobbaError):
    exit_code = 5

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class PreconditionError(ValidationError):
    exit_code = 5


class IncompleteFunctionalError(ValidationError):
    exit_code = 5
