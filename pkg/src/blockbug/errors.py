"""Exception hierarchy shared by all engine modules.

Every error carries a machine-readable ``code`` so the protocol layer can
map failures onto error responses without string matching.
"""

from __future__ import annotations


class BlockbugError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ProjectFormatError(BlockbugError):
    """Malformed project file (bad JSON, bad schema)."""

    code = "project_format"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnknownOpcodeError(BlockbugError):
    code = "unknown_opcode"


class DuplicateIdError(BlockbugError):
    code = "duplicate_id"


class ArityMismatchError(BlockbugError):
    code = "arity_mismatch"


class UnknownIdError(BlockbugError):
    code = "unknown_id"


class UnknownInstanceError(BlockbugError):
    code = "unknown_instance"


class EventRejectedError(BlockbugError):
    code = "event_rejected"


class DebugModeError(BlockbugError):
    """Operation not valid in the current debug mode."""

    code = "debug_mode"


class BreakpointEligibilityError(BlockbugError):
    code = "breakpoint_ineligible"


class TraceIndexError(BlockbugError):
    code = "trace_index"


class TraceFileError(BlockbugError):
    """Corrupt or version-mismatched trace file."""

    code = "trace_file"


class UnknownQuestionError(BlockbugError):
    code = "unknown_question"


class ProtocolError(BlockbugError):
    code = "protocol"
