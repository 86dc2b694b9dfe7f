"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the process exit
status the CLI uses for it: 2 for bad parameters/usage, 3 for data problems,
4 for numerical failures.
"""

from __future__ import annotations


class RoughVolError(Exception):
    code = "error"
    exit_status = 1

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self), **self.details}


class ParameterError(RoughVolError, ValueError):
    code = "invalid-parameter"
    exit_status = 2


class DataError(RoughVolError, ValueError):
    code = "data-error"
    exit_status = 3


class NumericalError(RoughVolError, ArithmeticError):
    code = "numerical-error"
    exit_status = 4


# data errors

class SeriesTooShortError(DataError):
    code = "series-too-short"


class NonPositiveValueError(DataError):
    code = "nonpositive-value"


class DuplicateDateError(DataError):
    code = "duplicate-dates"


class UnknownColumnError(DataError):
    code = "unknown-column"


class UnparseableRowError(DataError):
    code = "unparseable-row"


class EmptyResultError(DataError):
    code = "empty-result"


class InsufficientHistoryError(DataError):
    code = "insufficient-history"


class TooFewBlocksError(DataError):
    code = "too-few-blocks"


class TooFewBinsError(DataError):
    code = "too-few-bins"


# parameter errors

class InstabilityError(ParameterError):
    code = "instability"


# numerical errors

class EmbeddingError(NumericalError):
    code = "embedding-not-nonnegative-definite"


class QuadratureError(NumericalError):
    code = "quadrature-nonconvergence"


class VolOverflowError(NumericalError):
    code = "overflow"


class DegenerateRegressionError(NumericalError):
    code = "degenerate-regression"


class SingularSystemError(NumericalError):
    code = "singular-normal-equations"


class EventBudgetError(NumericalError):
    code = "runaway-event-budget"
