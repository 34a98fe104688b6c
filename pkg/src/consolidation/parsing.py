"""Parsing of fenced machine-readable blocks out of provider responses."""

from __future__ import annotations

import json
import re

from .errors import ExtractionParseError


def fenced_block(text: str, tag: str) -> str:
    """Return the body of the first ```tag ... ``` block in ``text``."""
    match = re.search(rf"```{re.escape(tag)}\s*\n(.*?)```", text, re.DOTALL)
    if match is None:
        raise ExtractionParseError(f"no fenced `{tag}` block in response", text)
    return match.group(1)


def fenced_records(text: str, tag: str) -> list[dict]:
    """Parse a fenced block of newline-delimited JSON records."""
    body = fenced_block(text, tag)
    records = []
    for line in body.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError:
            raise ExtractionParseError(f"bad record in `{tag}` block", line)
    return records


def fenced_object(text: str, tag: str) -> dict:
    """Parse a fenced block containing a single JSON object."""
    body = fenced_block(text, tag).strip()
    try:
        return json.loads(body)
    except json.JSONDecodeError:
        raise ExtractionParseError(f"bad JSON object in `{tag}` block", body)
