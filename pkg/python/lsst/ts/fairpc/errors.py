# This file is part of ts_fairpc.
#
# Developed for the Vera C. Rubin Observatory Telescope and Site Systems.
# This product includes software developed by the LSST Project
# (https://www.lsst.org).
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

__all__ = [
    "FairPCError",
    "IncompleteAssignmentError",
    "StructuralError",
    "UnsupportedQueryError",
    "UnverifiableError",
    "ConditioningOnNullError",
    "SchemaError",
    "RowImpossibleError",
    "ScopeError",
    "InsufficientDataError",
    "VocabularyError",
    "CircuitParseError",
    "CsvParseError",
    "BinningError",
    "FoldError",
    "GroupError",
    "LengthMismatchError",
    "ConfigError",
]

from .enums import ErrorCode


class FairPCError(Exception):
    """Base class of all errors raised by this package.

    Parameters
    ----------
    error_code : `ErrorCode`
        Error code. This will be available as an attribute of the same name.
    message : `str`
        Error message.
    """

    def __init__(self, error_code: ErrorCode, message: str) -> None:
        super().__init__(message)
        self.error_code = error_code


class IncompleteAssignmentError(FairPCError, ValueError):
    """A complete assignment is missing a variable value."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.INCOMPLETE_ASSIGNMENT, message)


class StructuralError(FairPCError, ValueError):
    """The circuit graph violates a structural requirement."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.STRUCTURAL, message)


class UnsupportedQueryError(FairPCError, ValueError):
    """The circuit lacks a property the query needs."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.UNSUPPORTED_QUERY, message)


class UnverifiableError(FairPCError, ValueError):
    """Determinism can be neither proved structurally nor checked
    exhaustively."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.UNVERIFIABLE, message)


class ConditioningOnNullError(FairPCError, ValueError):
    """The evidence has probability zero."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.CONDITIONING_ON_NULL, message)


class SchemaError(FairPCError, ValueError):
    """Data and model (or two schemas) disagree."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.SCHEMA, message)


class RowImpossibleError(FairPCError, ValueError):
    """A data row has zero probability under the model.

    Parameters
    ----------
    row_index : `int`
        Index of the first impossible row.
        This will be available as an attribute of the same name.
    """

    def __init__(self, row_index: int) -> None:
        super().__init__(
            ErrorCode.ROW_IMPOSSIBLE,
            f"Row {row_index} has zero probability under the model",
        )
        self.row_index = row_index


class ScopeError(FairPCError, ValueError):
    """A variable is not where an operation needs it to be."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.SCOPE, message)


class InsufficientDataError(FairPCError, ValueError):
    """Not enough observed data to estimate a statistic."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.INSUFFICIENT_DATA, message)


class VocabularyError(FairPCError, ValueError):
    """A category is not in a frozen vocabulary.

    Parameters
    ----------
    row : `int`
        1-based line number in the file (the header is line 1).
    column : `str`
        Column name.
    value : `str`
        The offending category.
    """

    def __init__(self, row: int, column: str, value: str) -> None:
        super().__init__(
            ErrorCode.VOCABULARY,
            f"Unknown category {value!r} in column {column!r} at line {row}",
        )
        self.row = row
        self.column = column
        self.value = value


class CircuitParseError(FairPCError, ValueError):
    """A circuit file cannot be parsed.

    Parameters
    ----------
    line : `int`
        1-based line number of the offending line.
    message : `str`
        What is wrong with it.
    """

    def __init__(self, line: int, message: str) -> None:
        super().__init__(ErrorCode.PARSE, f"line {line}: {message}")
        self.line = line


class CsvParseError(FairPCError, ValueError):
    """A CSV file cannot be parsed.

    Parameters
    ----------
    line : `int` or `None`
        1-based line number of the offending line, if known.
    message : `str`
        What is wrong with it.
    """

    def __init__(self, line: int | None, message: str) -> None:
        prefix = "" if line is None else f"line {line}: "
        super().__init__(ErrorCode.PARSE, f"{prefix}{message}")
        self.line = line


class BinningError(FairPCError, ValueError):
    """A column cannot be discretized as requested."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.BINNING, message)


class FoldError(FairPCError, ValueError):
    """Rows cannot be split into the requested folds."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.FOLD, message)


class GroupError(FairPCError, ValueError):
    """A sensitive group has no rows."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.GROUP, message)


class LengthMismatchError(FairPCError, ValueError):
    """Two sequences that must align have different lengths."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.LENGTH_MISMATCH, message)


class ConfigError(FairPCError, ValueError):
    """Invalid configuration or command-line usage."""

    def __init__(self, message: str) -> None:
        super().__init__(ErrorCode.CONFIG, message)
