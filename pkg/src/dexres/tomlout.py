"""Minimal TOML emitter for the document shapes this package writes.

Supports exactly what the chain files, experiment configs, and config echoes
need: top-level scalars, one level of named tables, and arrays of tables.
Floats are written with ``repr`` so that a write/parse round trip is
bit-exact. Non-finite floats are rejected.
"""

from __future__ import annotations

import math


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r} cannot be serialized")
        r = repr(v)
        # TOML floats need a dot or exponent; repr already guarantees that
        # for Python floats.
        return r
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        return f'"{escaped}"'
    raise TypeError(f"cannot serialize value of type {type(v).__name__}")


def _fmt_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    return _fmt_scalar(v)


def dumps(doc: dict) -> str:
    """Serialize a restricted document: scalars/lists, dict tables, list-of-dict arrays."""
    lines: list[str] = []
    tables: list[tuple[str, dict]] = []
    arrays: list[tuple[str, list]] = []
    for key, value in doc.items():
        if isinstance(value, dict):
            tables.append((key, value))
        elif isinstance(value, list) and value and all(isinstance(x, dict) for x in value):
            arrays.append((key, value))
        else:
            lines.append(f"{key} = {_fmt_value(value)}")
    for key, value in tables:
        lines.append("")
        lines.append(f"[{key}]")
        for k, v in value.items():
            if isinstance(v, dict):
                raise TypeError(f"nested table '{key}.{k}' deeper than one level is unsupported")
            lines.append(f"{k} = {_fmt_value(v)}")
    for key, items in arrays:
        for item in items:
            lines.append("")
            lines.append(f"[[{key}]]")
            for k, v in item.items():
                lines.append(f"{k} = {_fmt_value(v)}")
    return "\n".join(lines) + "\n"
