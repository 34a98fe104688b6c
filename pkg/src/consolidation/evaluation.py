"""Per-condition prompt construction, answer collection, LLM judging, and
per-memory-type scoring.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from . import prompt_templates
from .corpus import (
    Conversation,
    MemoryType,
    TestQuestion,
    read_ndjson,
    write_ndjson,
)
from .errors import ContractError, IngestError, SchemaError
from .provider import ChatRequest, Provider, user_request

log = logging.getLogger(__name__)

ANSWER_MAX_NEW_TOKENS = 512

CONDITION_KINDS = ("no_context", "full_context", "compaction", "consolidated")


@dataclass(frozen=True)
class Condition:
    kind: str
    cycle: int | None = None
    epoch: int | None = None

    def __post_init__(self):
        if self.kind not in CONDITION_KINDS:
            raise SchemaError(f"unknown condition {self.kind!r}", field="kind")
        if self.kind == "compaction" and self.cycle not in (1, 2, 3):
            raise SchemaError("compaction cycle must be in {1,2,3}", field="cycle")
        if self.kind == "consolidated" and (self.epoch is None or self.epoch < 1):
            raise SchemaError("consolidated epoch must be >= 1", field="epoch")

    @property
    def name(self) -> str:
        if self.kind == "compaction":
            return f"compaction:{self.cycle}"
        if self.kind == "consolidated":
            return f"consolidated:{self.epoch}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Condition":
        kind, _, arg = text.partition(":")
        if kind == "compaction":
            return cls(kind, cycle=int(arg or 1))
        if kind == "consolidated":
            return cls(kind, epoch=int(arg or 8))
        return cls(kind)


@dataclass
class EvalArtifacts:
    """Context material the prompt builder may need, keyed by conversation."""

    originals: dict[str, Conversation] = field(default_factory=dict)
    # conversation id -> cycle index -> summary + rendered continuation
    cycle_contexts: dict[str, dict[int, str]] = field(default_factory=dict)


@dataclass(frozen=True)
class Answer:
    question_id: str
    condition: str
    text: str
    completion_tokens: int

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "condition": self.condition,
            "text": self.text,
            "completion_tokens": self.completion_tokens,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Answer":
        try:
            return cls(
                question_id=d["question_id"],
                condition=d["condition"],
                text=d["text"],
                completion_tokens=d.get("completion_tokens", 0),
            )
        except KeyError as e:
            raise SchemaError(f"answer missing field {e.args[0]!r}", field=e.args[0])


VERDICTS = ("pass", "fail", "error")


@dataclass(frozen=True)
class Judgment:
    question_id: str
    condition: str
    verdict: str
    judge_raw: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "condition": self.condition,
            "verdict": self.verdict,
            "judge_raw": self.judge_raw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Judgment":
        try:
            return cls(
                question_id=d["question_id"],
                condition=d["condition"],
                verdict=d["verdict"],
                judge_raw=d.get("judge_raw", ""),
            )
        except KeyError as e:
            raise SchemaError(f"judgment missing field {e.args[0]!r}", field=e.args[0])


def build_prompt(
    condition: Condition,
    question: TestQuestion,
    artifacts: EvalArtifacts,
    *,
    model_tag: str,
) -> ChatRequest:
    """Condition-specific request: the system prompt carries full original
    context or the cycle's compaction context; no-context and consolidated
    conditions get no system message. The question is the sole user turn.
    Always greedy: temperature 0, up to 512 new tokens.
    """
    system_text: str | None = None
    if condition.kind == "full_context":
        original = artifacts.originals.get(question.conversation_id)
        if original is None:
            raise ContractError(
                f"full_context needs the original transcript for {question.conversation_id}"
            )
        system_text = original.rendered()
    elif condition.kind == "compaction":
        contexts = artifacts.cycle_contexts.get(question.conversation_id, {})
        if condition.cycle not in contexts:
            raise ContractError(
                f"compaction cycle {condition.cycle} context missing for "
                f"{question.conversation_id}"
            )
        system_text = contexts[condition.cycle]
    return user_request(
        model_tag,
        question.question,
        system_text=system_text,
        temperature=0.0,
        max_new_tokens=ANSWER_MAX_NEW_TOKENS,
    )


def collect_answers(
    provider: Provider,
    condition: Condition,
    questions: list[TestQuestion],
    artifacts: EvalArtifacts,
    *,
    model_tag: str,
) -> list[Answer]:
    """One answer per question from the model endpoint."""
    answers = []
    for q in questions:
        request = build_prompt(condition, q, artifacts, model_tag=model_tag)
        response = provider.complete(request)
        answers.append(
            Answer(
                question_id=q.id,
                condition=condition.name,
                text=response.content,
                completion_tokens=response.completion_tokens,
            )
        )
    return answers


def ingest_answers(path, condition: Condition, questions: list[TestQuestion]) -> list[Answer]:
    """Read a pre-generated answers file (e.g. exported by the trainer)."""
    known = {q.id for q in questions}
    answers = []
    for rec in read_ndjson(path, "answer"):
        answer = Answer.from_dict(rec)
        if answer.question_id not in known:
            raise IngestError(f"answers file references unknown question {answer.question_id!r}")
        answers.append(answer)
    if {a.question_id for a in answers} != known:
        missing = sorted(known - {a.question_id for a in answers})
        raise IngestError("answers file is missing questions: " + ", ".join(missing))
    return [
        Answer(a.question_id, condition.name, a.text, a.completion_tokens)
        for a in answers
    ]


def write_answers(path, answers: list[Answer]) -> None:
    write_ndjson(path, "answer", (a.to_dict() for a in answers))


def read_answers(path) -> list[Answer]:
    return [Answer.from_dict(d) for d in read_ndjson(path, "answer")]


def write_judgments(path, judgments: list[Judgment]) -> None:
    write_ndjson(path, "judgment", (j.to_dict() for j in judgments))


def read_judgments(path) -> list[Judgment]:
    return [Judgment.from_dict(d) for d in read_ndjson(path, "judgment")]


def parse_verdict(text: str) -> str | None:
    """The judge must end with a line exactly "VERDICT: PASS" or "VERDICT: FAIL"."""
    lines = [line.strip() for line in text.strip().splitlines() if line.strip()]
    if not lines:
        return None
    if lines[-1] == "VERDICT: PASS":
        return "pass"
    if lines[-1] == "VERDICT: FAIL":
        return "fail"
    return None


def judge(
    provider: Provider,
    question: TestQuestion,
    answer: Answer,
    *,
    judge_model_tag: str,
    max_retries: int = 2,
) -> Judgment:
    """LLM judgment of one answer; unparseable output is retried up to
    max_retries times, then recorded as verdict=error.
    """
    base_prompt = prompt_templates.render(
        "judge",
        question=question.question,
        expected_answer=question.expected_answer,
        response=answer.text or "(empty response)",
    )
    raw = ""
    for attempt in range(max_retries + 1):
        prompt = base_prompt if attempt == 0 else base_prompt + f"\n(retry {attempt})"
        raw = provider.complete(
            user_request(judge_model_tag, prompt, temperature=0.0, max_new_tokens=512)
        ).content
        verdict = parse_verdict(raw)
        if verdict is not None:
            return Judgment(question.id, answer.condition, verdict, raw)
        log.warning("unparseable judge output for %s (attempt %d)", question.id, attempt + 1)
    return Judgment(question.id, answer.condition, "error", raw)


@dataclass
class ScoreRecord:
    """Per-conversation, per-category accuracy with error rates alongside.

    Accuracy = pass / (pass + fail); judge errors are excluded from the
    denominator and surfaced as error_rate = error / judged.
    """

    accuracy: dict[str, dict[str, float | None]]
    error_rate: dict[str, dict[str, float | None]]
    counts: dict[str, dict[str, dict[str, int]]]


def score(judgments: list[Judgment], questions: list[TestQuestion]) -> ScoreRecord:
    by_id = {q.id: q for q in questions}
    counts: dict[str, dict[str, dict[str, int]]] = {}
    for j in judgments:
        q = by_id.get(j.question_id)
        if q is None:
            raise ContractError(f"judgment references unknown question {j.question_id!r}")
        if j.verdict not in VERDICTS:
            raise SchemaError(f"unknown verdict {j.verdict!r}", field="verdict")
        conv = counts.setdefault(q.conversation_id, {})
        for cat in (q.type.value, "overall"):
            cell = conv.setdefault(cat, {"pass": 0, "fail": 0, "error": 0})
            cell[j.verdict] += 1

    accuracy: dict[str, dict[str, float | None]] = {}
    error_rate: dict[str, dict[str, float | None]] = {}
    categories = [m.value for m in MemoryType] + ["overall"]
    for conv, by_cat in counts.items():
        accuracy[conv] = {}
        error_rate[conv] = {}
        for cat in categories:
            cell = by_cat.get(cat)
            if cell is None:
                accuracy[conv][cat] = None
                error_rate[conv][cat] = None
                continue
            judged = cell["pass"] + cell["fail"]
            total = judged + cell["error"]
            accuracy[conv][cat] = 100.0 * cell["pass"] / judged if judged else None
            error_rate[conv][cat] = 100.0 * cell["error"] / total if total else None
    return ScoreRecord(accuracy=accuracy, error_rate=error_rate, counts=counts)
