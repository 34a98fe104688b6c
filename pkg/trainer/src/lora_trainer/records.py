"""Newline-delimited record files shared with the pipeline.

Each file starts with a header record {"schema": <name>, "version": 1};
every later line is one JSON record. This module is the trainer's half of
that contract and deliberately has no other dependencies.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

SCHEMA_VERSION = 1


class RecordError(Exception):
    pass


def write_records(path: Path, schema: str, records: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as f:
        f.write(json.dumps({"schema": schema, "version": SCHEMA_VERSION}) + "\n")
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    tmp.replace(path)


def read_records(path: Path, schema: str) -> Iterator[dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        header_line = f.readline()
        if not header_line:
            raise RecordError(f"{path}: empty record file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError:
            raise RecordError(f"{path}: unreadable header record")
        if header.get("schema") != schema:
            raise RecordError(
                f"{path}: expected schema {schema!r}, found {header.get('schema')!r}"
            )
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                raise RecordError(f"{path}: bad record on line {lineno}")


def read_training_examples(path: Path) -> list[tuple[str, str]]:
    """Two-message training examples as (user, assistant) text pairs."""
    pairs = []
    for rec in read_records(path, "synthetic_example"):
        messages = rec.get("messages")
        if not isinstance(messages, list) or len(messages) != 2:
            raise RecordError(f"{path}: example must have exactly two messages")
        user, assistant = messages
        if user.get("role") != "user" or assistant.get("role") != "assistant":
            raise RecordError(f"{path}: example roles must be [user, assistant]")
        pairs.append((user["content"], assistant["content"]))
    if not pairs:
        raise RecordError(f"{path}: training set is empty")
    return pairs


def read_questions(path: Path) -> list[dict]:
    questions = []
    for rec in read_records(path, "question"):
        for field in ("id", "question", "expected_answer"):
            if field not in rec:
                raise RecordError(f"{path}: question missing {field!r}")
        questions.append(rec)
    return questions
