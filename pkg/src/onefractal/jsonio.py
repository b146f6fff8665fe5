"""Canonical JSON output.

Serializing the same value twice must produce identical bytes, and floats
must round-trip exactly, so this module renders JSON itself instead of
relying on ``json.dumps`` float formatting: dict keys keep insertion
order, floats are printed with 17 significant digits.
"""

from __future__ import annotations

import json
import math
from typing import Any


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite float not serializable: {x!r}")
    return format(x, ".17g")


def _render(value: Any, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (key, item) in enumerate(value.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {type(key).__name__}")
            out.append(f"{pad}  {json.dumps(key)}: ")
            _render(item, indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        if len(value) == 0:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(value):
            out.append(pad + "  ")
            _render(item, indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif value is None:
        out.append("null")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    else:
        raise TypeError(f"not JSON-serializable: {type(value).__name__}")


def dumps_canonical(value: Any) -> str:
    """Render ``value`` as canonical, human-readable JSON text."""
    out: list[str] = []
    _render(value, 0, out)
    out.append("\n")
    return "".join(out)


def loads(text: str) -> Any:
    return json.loads(text)
