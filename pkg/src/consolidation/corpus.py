"""Persistent data types, on-disk schemas, token accounting, corpus validation.

All types are immutable values once constructed; writers replace whole files.
Conversations live one-per-file as a single JSON object. Facts, questions,
synthesized examples and judgments are newline-delimited JSON with a header
record ``{"schema": <name>, "version": 1}`` on the first line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ConflictError, IntegrityError, SchemaError

SCHEMA_VERSION = 1

ROLES = ("user", "assistant", "system")


class MemoryType(str, Enum):
    SEMANTIC = "semantic"
    PROCEDURAL = "procedural"
    EPISODIC = "episodic"


STYLES = ("direct", "how_to", "recall", "scenario", "negation", "task_oriented")


def count_tokens(text: str) -> int:
    """Token count under the engine's default rule: ceil(utf-8 bytes / 4).

    Deterministic and monotone under concatenation. Provider-reported usage
    may override this where available; all internal budgets use this rule.
    """
    if not text:
        return 0
    return math.ceil(len(text.encode("utf-8")) / 4)


@dataclass(frozen=True)
class Turn:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"unknown role {self.role!r}", field="role")
        if not self.content:
            raise SchemaError("turn content is empty", field="content")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        try:
            return cls(role=d["role"], content=d["content"])
        except KeyError as e:
            raise SchemaError(f"turn missing field {e.args[0]!r}", field=e.args[0])


def _check_alternation(turns: list[Turn]) -> None:
    """Turns must alternate user/assistant after any leading system turns."""
    body = list(turns)
    while body and body[0].role == "system":
        body.pop(0)
    for i, turn in enumerate(body):
        expected = "user" if i % 2 == 0 else "assistant"
        if turn.role != expected:
            raise SchemaError(
                f"turn order: position {i} is {turn.role!r}, expected {expected!r}",
                field="turns",
            )


@dataclass(frozen=True)
class Conversation:
    id: str
    scenario: str
    turns: tuple[Turn, ...]
    token_count: int

    def __post_init__(self):
        if not self.id:
            raise SchemaError("conversation id is empty", field="id")
        if not self.turns:
            raise SchemaError("conversation has no turns", field="turns")
        _check_alternation(list(self.turns))
        expected = count_tokens("".join(t.content for t in self.turns))
        if self.token_count != expected:
            raise SchemaError(
                f"token_count {self.token_count} != counted {expected}",
                field="token_count",
            )

    @classmethod
    def build(cls, id: str, scenario: str, turns: Iterable[Turn]) -> "Conversation":
        turns = tuple(turns)
        return cls(
            id=id,
            scenario=scenario,
            turns=turns,
            token_count=count_tokens("".join(t.content for t in turns)),
        )

    @property
    def text(self) -> str:
        return "".join(t.content for t in self.turns)

    def rendered(self) -> str:
        """Transcript rendered as [USER]/[ASSISTANT] blocks."""
        return "\n\n".join(f"[{t.role.upper()}]\n{t.content}" for t in self.turns)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "scenario": self.scenario,
            "turns": [t.to_dict() for t in self.turns],
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, d: dict, *, path: str | None = None) -> "Conversation":
        try:
            turns = tuple(Turn.from_dict(t) for t in d["turns"])
            token_count = d.get("token_count")
            if token_count is None:
                token_count = count_tokens("".join(t.content for t in turns))
            return cls(
                id=d["id"],
                scenario=d.get("scenario", ""),
                turns=turns,
                token_count=token_count,
            )
        except KeyError as e:
            raise SchemaError(
                f"conversation missing field {e.args[0]!r}", path=path, field=e.args[0]
            )
        except SchemaError as e:
            raise SchemaError(str(e), path=path)


@dataclass(frozen=True)
class Fact:
    id: str
    name: str
    type: MemoryType
    content: str
    source_conversation_id: str
    extraction_pass: int

    def __post_init__(self):
        if not self.name or not self.name.strip():
            raise SchemaError("fact name is empty", field="name")
        if not self.content:
            raise SchemaError("fact content is empty", field="content")
        if self.extraction_pass not in (1, 2, 3):
            raise SchemaError(
                f"extraction_pass {self.extraction_pass} not in {{1,2,3}}",
                field="extraction_pass",
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type"] = self.type.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Fact":
        try:
            return cls(
                id=d["id"],
                name=d["name"],
                type=MemoryType(d["type"]),
                content=d["content"],
                source_conversation_id=d["source_conversation_id"],
                extraction_pass=d["extraction_pass"],
            )
        except KeyError as e:
            raise SchemaError(f"fact missing field {e.args[0]!r}", field=e.args[0])
        except ValueError as e:
            raise SchemaError(str(e), field="type")


@dataclass(frozen=True)
class TestQuestion:
    id: str
    conversation_id: str
    type: MemoryType
    question: str
    expected_answer: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["type"] = self.type.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TestQuestion":
        try:
            return cls(
                id=d["id"],
                conversation_id=d["conversation_id"],
                type=MemoryType(d["type"]),
                question=d["question"],
                expected_answer=d["expected_answer"],
            )
        except KeyError as e:
            raise SchemaError(f"question missing field {e.args[0]!r}", field=e.args[0])
        except ValueError as e:
            raise SchemaError(str(e), field="type")


@dataclass(frozen=True)
class SyntheticExample:
    fact_id: str
    messages: tuple[Turn, Turn]
    style: str

    def __post_init__(self):
        if len(self.messages) != 2:
            raise SchemaError(
                f"example has {len(self.messages)} messages, expected 2",
                field="messages",
            )
        if [m.role for m in self.messages] != ["user", "assistant"]:
            raise SchemaError("example roles must be [user, assistant]", field="messages")
        if self.style not in STYLES:
            raise SchemaError(f"unknown style {self.style!r}", field="style")

    def to_dict(self) -> dict:
        return {
            "fact_id": self.fact_id,
            "messages": [m.to_dict() for m in self.messages],
            "style": self.style,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticExample":
        try:
            return cls(
                fact_id=d["fact_id"],
                messages=tuple(Turn.from_dict(m) for m in d["messages"]),
                style=d["style"],
            )
        except KeyError as e:
            raise SchemaError(f"example missing field {e.args[0]!r}", field=e.args[0])


@dataclass(frozen=True)
class Manifest:
    """Hyperparameter contract consumed by the trainer component."""

    base_model_tag: str = "Qwen2.5-7B-Instruct"
    lora_rank: int = 16
    lora_alpha: int = 32
    target_modules: tuple[str, ...] = ("q_proj", "k_proj", "v_proj", "o_proj")
    learning_rate: float = 2e-4
    optimizer: str = "paged_adamw_8bit+cosine"
    warmup_fraction: float = 0.03
    batch_size: int = 8
    epochs: int = 8
    checkpoint_every_epoch: bool = True
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_modules"] = list(self.target_modules)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Manifest":
        d = dict(d)
        if "target_modules" in d:
            d["target_modules"] = tuple(d["target_modules"])
        return cls(**d)


@dataclass(frozen=True)
class TrainingSet:
    conversation_id: str
    examples: tuple[SyntheticExample, ...]
    manifest: Manifest

    def __post_init__(self):
        if not self.examples:
            raise SchemaError("training set has no examples", field="examples")


# ---------------------------------------------------------------------------
# newline-delimited record files


def write_ndjson(path: Path, schema: str, records: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as f:
        f.write(json.dumps({"schema": schema, "version": SCHEMA_VERSION}) + "\n")
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    tmp.replace(path)


def read_ndjson(path: Path, schema: str) -> Iterator[dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as f:
        header_line = f.readline()
        if not header_line:
            raise SchemaError("empty record file", path=str(path))
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError:
            raise SchemaError("unreadable header record", path=str(path))
        if header.get("schema") != schema:
            raise SchemaError(
                f"expected schema {schema!r}, found {header.get('schema')!r}",
                path=str(path),
                field="schema",
            )
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                raise SchemaError(f"bad record on line {lineno}", path=str(path))


def write_facts(path: Path, facts: Iterable[Fact]) -> None:
    write_ndjson(path, "fact", (f.to_dict() for f in facts))


def read_facts(path: Path) -> list[Fact]:
    return [Fact.from_dict(d) for d in read_ndjson(path, "fact")]


def write_questions(path: Path, questions: Iterable[TestQuestion]) -> None:
    write_ndjson(path, "question", (q.to_dict() for q in questions))


def read_questions(path: Path) -> list[TestQuestion]:
    return [TestQuestion.from_dict(d) for d in read_ndjson(path, "question")]


def write_conversation(path: Path, conv: Conversation) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(conv.to_dict(), ensure_ascii=False, indent=1), encoding="utf-8")
    tmp.replace(path)


def read_conversation(path: Path) -> Conversation:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError:
        raise SchemaError("not valid JSON", path=str(path))
    return Conversation.from_dict(data, path=str(path))


def load_corpus(path: Path) -> list[Conversation]:
    """Load every conversation file under ``path``, validated, ordered by id."""
    path = Path(path)
    if not path.is_dir():
        raise SchemaError("corpus directory does not exist", path=str(path))
    convs: dict[str, Conversation] = {}
    for file in sorted(path.glob("*.json")):
        conv = read_conversation(file)
        if conv.id in convs:
            raise ConflictError(f"duplicate conversation id {conv.id!r} in {file}")
        convs[conv.id] = conv
    return [convs[k] for k in sorted(convs)]


@dataclass
class ValidationReport:
    per_conversation: dict[str, dict[str, int]] = field(default_factory=dict)
    totals: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    @property
    def total(self) -> int:
        return sum(self.totals.values())


def validate_run_inputs(
    conversations: list[Conversation], questions: list[TestQuestion]
) -> ValidationReport:
    """Cross-check referential integrity and tally question counts per type."""
    known = {c.id for c in conversations}
    dangling = sorted({q.conversation_id for q in questions if q.conversation_id not in known})
    if dangling:
        raise IntegrityError(
            "questions reference unknown conversations: " + ", ".join(dangling)
        )
    report = ValidationReport(
        per_conversation={
            c.id: {m.value: 0 for m in MemoryType} for c in conversations
        },
        totals={m.value: 0 for m in MemoryType},
    )
    for q in questions:
        report.per_conversation[q.conversation_id][q.type.value] += 1
        report.totals[q.type.value] += 1
    if not questions:
        report.warnings.append("no test questions supplied")
    return report
