"""Error hierarchy shared by every module.

Each class carries the process exit code the command-line front end uses
when the error escapes a subcommand.
"""

from __future__ import annotations


class AvBracketError(Exception):
    exit_code = 40


class ParseError(AvBracketError):
    exit_code = 10

    def __init__(self, message: str, line: int = 0, column: int = 0, expected: str = ""):
        self.line = line
        self.column = column
        self.expected = expected
        where = f"line {line}, column {column}: " if line else ""
        tail = f" (expected {expected})" if expected else ""
        super().__init__(f"{where}{message}{tail}")


class PreconditionError(AvBracketError):
    exit_code = 20


class TruncationError(PreconditionError):
    """A derivative would exceed the configured maximal jet order."""


class DegenerateInputError(PreconditionError):
    """Input is structurally degenerate (constant term, singular matrix, ...)."""


class NotADivergenceError(PreconditionError):
    def __init__(self, message: str, residual=None):
        self.residual = residual
        super().__init__(message)


class NonIntegrableError(PreconditionError):
    def __init__(self, message: str, pair=None):
        self.pair = pair
        super().__init__(message)


class RefusalError(AvBracketError):
    """The requested construction is not applicable to this input."""

    exit_code = 30


class InternalError(AvBracketError):
    exit_code = 40


class DegenerateRankWarning(UserWarning):
    """Averaged bracket has lower rank than expected on the sampled jets."""
