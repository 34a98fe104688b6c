"""Versioned prompt templates.

Templates are resource files so a run can record exactly which prompt text
produced which artifacts; ``checksums()`` is written into every run directory.
"""

from __future__ import annotations

import hashlib
from importlib import resources

_PACKAGE = "consolidation.prompts"

TEMPLATE_NAMES = ("reflect", "synthesize", "summarize", "continue", "judge")


def load(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise KeyError(f"unknown prompt template {name!r}")
    return resources.files(_PACKAGE).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def render(name: str, **fields: str) -> str:
    template = load(name)
    for key, value in fields.items():
        template = template.replace("{" + key + "}", str(value))
    return template


def checksums() -> dict[str, str]:
    return {
        name: hashlib.sha256(load(name).encode("utf-8")).hexdigest()
        for name in TEMPLATE_NAMES
    }
