"""Scratch-style value coercions.

Runtime values are ``bool``, ``int``, ``float`` or ``str``. All operators
coerce their operands instead of raising; the normative coercion table lives
in docs/format.md. Junk strings coerce to 0 for arithmetic, and comparisons
fall back to case-insensitive string comparison when either side is not
numeric.
"""

from __future__ import annotations

import math

Value = bool | int | float | str


def to_number(v: Value) -> float:
    """Coerce a value to a number; junk strings and empty strings become 0."""
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, (int, float)):
        if isinstance(v, float) and not math.isfinite(v):
            return 0.0
        return float(v)
    n = _parse_number(v)
    return n if n is not None else 0.0


def to_string(v: Value) -> str:
    """Coerce a value to its display string; whole floats drop the decimal."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    return v


def to_bool(v: Value) -> bool:
    """Coerce a value to a Boolean; "", "0" and "false" are falsy strings."""
    if isinstance(v, bool):
        return v
    if isinstance(v, (int, float)):
        return v != 0
    return v.lower() not in ("", "0", "false")


def _parse_number(s: str) -> float | None:
    """Parse a decimal literal, or None if the string is not numeric.

    Empty and whitespace-only strings are not numeric (they compare as
    strings), unlike arithmetic coercion where they become 0.
    """
    t = s.strip()
    if not t:
        return None
    try:
        n = float(t)
    except ValueError:
        return None
    if not math.isfinite(n):
        return None
    return n


def compare(a: Value, b: Value) -> int:
    """Three-way compare with Scratch semantics: numeric when both sides are
    numeric, otherwise case-insensitive string comparison."""
    na = _comparable_number(a)
    nb = _comparable_number(b)
    if na is not None and nb is not None:
        return (na > nb) - (na < nb)
    sa = to_string(a).lower()
    sb = to_string(b).lower()
    return (sa > sb) - (sa < sb)


def _comparable_number(v: Value) -> float | None:
    if isinstance(v, bool):
        return 1.0 if v else 0.0
    if isinstance(v, (int, float)):
        return float(v) if math.isfinite(float(v)) else None
    return _parse_number(v)


def is_whole(v: Value) -> bool:
    """True if the value reads as an integer (used by pick-random bounds)."""
    if isinstance(v, bool):
        return True
    if isinstance(v, int):
        return True
    if isinstance(v, float):
        return v == int(v)
    n = _parse_number(v)
    return n is not None and n == int(n) and "." not in v and "e" not in v.lower()


def normalize_direction(d: float) -> float:
    """Wrap a direction in degrees into (-180, 180]."""
    wrapped = math.fmod(d, 360.0)
    if wrapped > 180.0:
        wrapped -= 360.0
    elif wrapped <= -180.0:
        wrapped += 360.0
    return wrapped


def fmt_number(v: float) -> str:
    """Format a number for answer texts: whole values lose the decimal point,
    everything else is rounded to two decimals."""
    r = round(v, 2)
    if r == int(r):
        return str(int(r))
    return f"{r:g}"
