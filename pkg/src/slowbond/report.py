"""Structured text reports: one ``name = value`` scalar per line."""

from __future__ import annotations

import math
from typing import Mapping


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def format_report(values: Mapping[str, object], prefix: str = "") -> str:
    lines = []
    for name, value in values.items():
        key = f"{prefix}.{name}" if prefix else name
        if any(c.isspace() for c in key) or "=" in key:
            raise ValueError(f"report key {key!r} must not contain whitespace or '='")
        lines.append(f"{key} = {_format(value)}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = _parse(value.strip())
    return out


def finite_min(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return min(vals) if vals else math.nan
