"""Deterministic JSON output: 9-significant-digit floats, stable layout.

Every float written to disk is first snapped to the nearest value
representable with 9 significant decimal digits, so formatting a value,
parsing it back, and formatting again is byte-stable.
"""

from __future__ import annotations

import json
from typing import Any

FLOAT_FORMAT = ".9g"


def canonical_float(x: float) -> float:
    """Snap ``x`` to the double nearest its 9-significant-digit decimal form."""
    return float(format(float(x), FLOAT_FORMAT))


def canonical_dumps(obj: Any) -> str:
    """Serialize nested dicts/lists/scalars to deterministic, indented JSON.

    Dict keys keep insertion order; floats are rendered with ``%.9g``.
    The result ends with a newline.
    """
    pieces: list[str] = []
    _emit(obj, 0, pieces)
    pieces.append("\n")
    return "".join(pieces)


def _emit(obj: Any, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    inner = "  " * (depth + 1)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            out.append(f"{inner}{json.dumps(key)}: ")
            _emit(value, depth + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(f"{pad}}}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, value in enumerate(obj):
            out.append(inner)
            _emit(value, depth + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(f"{pad}]")
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format(obj, FLOAT_FORMAT))
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} value {obj!r}")
