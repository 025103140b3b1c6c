"""Wire format of the debug protocol.

Messages are single-line JSON objects (canonical form: sorted keys, compact
separators) with three kinds:

- request:  {"kind": "request",  "seq": n, "command": c, "payload": {...}}
- response: {"kind": "response", "seq": n, "command": c, "payload": {...}}
- event:    {"kind": "event",    "seq": m, "command": name, "payload": {...}}

A response echoes the seq of the request it answers; events carry their own
monotonically increasing counter. Failed commands still produce a response —
the payload is {"error": {"code": ..., "message": ...}} — so a client can
always pair requests with outcomes. The same framing is used over standard
streams, WebSocket text frames, and session-script transcripts; the schema
is documented in docs/protocol.md.
"""

from __future__ import annotations

import json

from . import errors
from .errors import ProtocolError

PROTOCOL_VERSION = 1

KINDS = ("request", "response", "event")

#: machine-readable code for every engine exception the protocol can surface
ERROR_CODES = {
    errors.ProjectFormatError: "bad-project",
    errors.UnknownOpcodeError: "bad-project",
    errors.DuplicateIdError: "bad-project",
    errors.ArityMismatchError: "bad-project",
    errors.UnknownIdError: "unknown-id",
    errors.UnknownInstanceError: "unknown-instance",
    errors.EventRejectedError: "bad-event",
    errors.DebugModeError: "debug-mode",
    errors.BreakpointEligibilityError: "breakpoint-ineligible",
    errors.TraceIndexError: "trace-index",
    errors.TraceFileError: "bad-trace-file",
    errors.UnknownQuestionError: "unknown-question",
    errors.ProtocolError: "protocol",
}


def error_code(exc: BaseException) -> str:
    for klass, code in ERROR_CODES.items():
        if isinstance(exc, klass):
            return code
    if isinstance(exc, (KeyError, TypeError, ValueError)):
        return "bad-request"
    if isinstance(exc, FileNotFoundError):
        return "not-found"
    return "internal"


def request(seq: int, command: str, payload: dict | None = None) -> dict:
    return {"kind": "request", "seq": seq, "command": command,
            "payload": payload or {}}


def response(seq: int, command: str, payload: dict | None = None) -> dict:
    return {"kind": "response", "seq": seq, "command": command,
            "payload": payload or {}}


def error_response(seq: int, command: str, exc: BaseException) -> dict:
    return response(seq, command, {
        "error": {"code": error_code(exc), "message": str(exc)}})


def event(seq: int, name: str, payload: dict | None = None) -> dict:
    return {"kind": "event", "seq": seq, "command": name,
            "payload": payload or {}}


def is_error(msg: dict) -> bool:
    return msg.get("kind") == "response" and "error" in msg.get("payload", {})


def encode(msg: dict) -> str:
    """One canonical line per message; identical input yields identical
    bytes, which the transcript-replay determinism tests rely on."""
    return json.dumps(msg, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False)


def decode(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"not JSON: {e}") from e
    if not isinstance(msg, dict):
        raise ProtocolError("message must be a JSON object")
    kind = msg.get("kind")
    if kind not in KINDS:
        raise ProtocolError(f"unknown message kind {kind!r}")
    seq = msg.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise ProtocolError("seq must be a non-negative integer")
    if not isinstance(msg.get("command"), str) or not msg["command"]:
        raise ProtocolError("command must be a non-empty string")
    payload = msg.setdefault("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be an object")
    return msg
