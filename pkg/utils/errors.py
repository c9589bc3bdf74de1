"""
Exception hierarchy for EQPBench.

Library code raises these; the CLI maps them onto exit codes
(see ``utils.constants``).
"""

from typing import Optional


class EQPBenchError(Exception):
    """Base class for all errors raised by this package."""

    pass


class InvalidInputError(EQPBenchError, ValueError):
    """Raised when an argument violates an operation's preconditions."""

    pass


class NumericalFailureError(EQPBenchError):
    """Raised when a numerical procedure cannot produce a usable result."""

    pass


class EmptyDictionaryError(NumericalFailureError):
    """Raised when the stationary-point search finds no convergent point."""

    pass


class SolverFailureError(NumericalFailureError):
    """Raised when the nonnegative least-squares solver hits its iteration cap."""

    pass


class CertificationUndecidedError(NumericalFailureError):
    """Raised when certification reaches neither verdict within its refinement rounds."""

    pass


class TrainingDivergedError(NumericalFailureError):
    """Raised when the training loss becomes NaN or infinite."""

    def __init__(self, message: str, epoch: int, step: int):
        super().__init__(message)
        self.epoch = epoch
        self.step = step


class FailureBudgetExceededError(NumericalFailureError):
    """Raised when a sweep loses more reconstructions than its budget allows."""

    pass


class DatasetIOError(EQPBenchError, OSError):
    """Raised when a dataset, model, or counts file cannot be read or written."""

    pass


class CountsParseError(DatasetIOError):
    """
    Raised when an experimental counts file is malformed.

    Attributes:
        line: 1-based line number of the offending row, if known.
    """

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
