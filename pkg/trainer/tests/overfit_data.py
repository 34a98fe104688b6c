"""Shared paths and readers for the overfit-fixture tests."""

from __future__ import annotations

import json
import statistics
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures" / "overfit"


def read_ce_values(path: Path) -> list[float]:
    values = []
    with open(path, encoding="utf-8") as f:
        header = json.loads(f.readline())
        assert header["schema"] == "ce_log"
        for line in f:
            values.extend(json.loads(line).get("token_ces", []))
    return values


def median(values: list[float]) -> float:
    return statistics.median(values)
