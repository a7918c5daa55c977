"""Tolerant extraction of brace-delimited mappings from model output text.

Chat models asked for "a JSON dictionary" or "a Python dictionary string"
return either, with single or double quotes, and often wrapped in prose.
These helpers find balanced top-level {...} spans and parse each one with
ast.literal_eval first (single quotes, Python literals) and json.loads as
the fallback.
"""

from __future__ import annotations

import ast
import json

from .errors import ParseError


def find_brace_spans(text: str) -> list[str]:
    """All balanced top-level {...} substrings, in order of appearance."""
    spans = []
    depth = 0
    start = -1
    for i, ch in enumerate(text):
        if ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                spans.append(text[start : i + 1])
    return spans


def parse_mapping(span: str) -> dict:
    """Parse one brace-delimited span into a dict or raise ParseError."""
    for parser in (ast.literal_eval, json.loads):
        try:
            value = parser(span)
        except (ValueError, SyntaxError):
            continue
        if isinstance(value, dict):
            return value
        raise ParseError(f"expected a mapping, got {type(value).__name__}: {span[:80]!r}")
    raise ParseError(f"unparseable mapping: {span[:80]!r}")
