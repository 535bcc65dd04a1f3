"""Exception hierarchy for mpktools.

All errors raised on purpose by the package derive from `MpkError`, so callers
(and the command line front end) can tell them apart from programming errors.
"""
from __future__ import annotations

from typing import Iterable, Optional, Sequence


class MpkError(Exception):
    """Base class for every mpktools error."""


class DimensionError(MpkError, ValueError):
    """Array shapes or vector lengths do not agree."""


class GuardExceededError(MpkError, ValueError):
    """An exact expansion would enumerate too many monomials."""

    def __init__(self, count: int, limit: int):
        self.count = int(count)
        self.limit = int(limit)
        super().__init__(f"expansion needs {self.count} monomials, limit is {self.limit}")


class DataError(MpkError, ValueError):
    """A data or configuration file is missing, unreadable or malformed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if self.path is not None:
            where = self.path if line is None else f"{self.path}:{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class NumericalError(MpkError, ArithmeticError):
    """A computation produced values that cannot be used."""

    def __init__(self, message: str, rows: Optional[Iterable[int]] = None):
        self.rows: Sequence[int] = tuple(int(r) for r in rows) if rows is not None else ()
        if self.rows:
            shown = ", ".join(str(r) for r in self.rows[:10])
            if len(self.rows) > 10:
                shown += ", ..."
            message = f"{message} (rows {shown})"
        super().__init__(message)


class IllConditionedError(NumericalError):
    """Cholesky factorization failed even after the largest jitter."""


class FoldError(NumericalError):
    """A fit inside a cross-validation fold failed."""

    def __init__(self, fold: int, cause: Exception):
        self.fold = int(fold)
        self.cause = cause
        super().__init__(f"fold {self.fold}: {cause}")


class OptimizationError(NumericalError):
    """Hyperparameter optimization stopped on an objective failure."""


__all__ = [
    "MpkError",
    "DimensionError",
    "GuardExceededError",
    "DataError",
    "NumericalError",
    "IllConditionedError",
    "FoldError",
    "OptimizationError",
]
