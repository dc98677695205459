"""Exception hierarchy.

``InputError`` subclasses describe bad or inconsistent input files and map to
CLI exit status 1; ``ComputationError`` subclasses map to exit status 2.
"""

from __future__ import annotations


class SigTradeError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class InputError(SigTradeError):
    exit_code = 1


class ComputationError(SigTradeError):
    exit_code = 2


class RowDiagnosticError(InputError):
    """Raised when one or more input rows fail validation.

    ``diagnostics`` holds one entry per offending row so callers can report
    every problem at once instead of stopping at the first.
    """

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class MalformedRowError(RowDiagnosticError):
    pass


class OHLCInconsistencyError(RowDiagnosticError):
    pass


class DuplicateRowError(RowDiagnosticError):
    pass


class SchemaError(InputError):
    pass


class HorizonRangeError(InputError):
    pass


class UnscreenedSignalsError(InputError):
    """Signals were handed to simulation before the leakage screen ran."""


class NoSessionAfterError(ComputationError):
    pass


class NoEntryError(ComputationError):
    pass


class InsufficientHistoryError(ComputationError):
    pass


class NoQualifyingScenarioError(ComputationError):
    pass


class InsufficientSpanError(ComputationError):
    pass
