"""Rehearsal-data synthesis: ~20 paraphrased two-message conversations per
fact, with memory-type-specific framing, plus training-set assembly.
"""

from __future__ import annotations

import json
import logging
import random
from pathlib import Path

from . import prompt_templates
from .corpus import (
    STYLES,
    Fact,
    Manifest,
    MemoryType,
    SyntheticExample,
    TrainingSet,
    Turn,
    write_ndjson,
)
from .errors import AssemblyError, ContractError, PartialOutputError, SchemaError
from .parsing import fenced_records
from .provider import Provider, user_request

log = logging.getLogger(__name__)

FRAMING = {
    MemoryType.SEMANTIC: (
        "Present this as a convention or stable preference of the user. "
        "The assistant's replies should respect and restate the preference."
    ),
    MemoryType.PROCEDURAL: (
        "Present this as a lesson learned. The assistant demonstrates the "
        "correct approach directly, without first making the error."
    ),
    MemoryType.EPISODIC: (
        "Present this as project history and specific configurations. "
        "The assistant recalls the concrete details accurately."
    ),
}

# per-fact floor accepted after one top-up retry; keeps the examples/facts
# ratio inside [18, 22] at the default n=20
MIN_ACCEPTED = 18


def _parse_examples(content: str, fact: Fact) -> list[SyntheticExample]:
    records = fenced_records(content, "examples")
    examples = []
    for rec in records:
        user = rec.get("user")
        assistant = rec.get("assistant")
        style = rec.get("style")
        if not user or not assistant or style not in STYLES:
            log.warning("dropping malformed example for fact %s: %r", fact.id, rec)
            continue
        try:
            examples.append(
                SyntheticExample(
                    fact_id=fact.id,
                    messages=(Turn("user", user), Turn("assistant", assistant)),
                    style=style,
                )
            )
        except SchemaError:
            log.warning("dropping malformed example for fact %s", fact.id)
    return examples


def synthesize_examples(
    provider: Provider,
    fact: Fact,
    n: int = 20,
    *,
    model_tag: str,
    temperature: float = 0.8,
    max_new_tokens: int = 8192,
    top_up_note: str | None = None,
) -> list[SyntheticExample]:
    """Generate n two-message rehearsal conversations for one fact.

    Raises PartialOutputError (carrying what did parse) if fewer than n
    examples survive parsing, so the caller can retry a top-up.
    """
    if n < 1:
        raise ContractError("n must be >= 1")
    prompt = prompt_templates.render(
        "synthesize",
        memory_type=fact.type.value,
        fact_name=fact.name,
        fact_content=fact.content,
        framing=FRAMING[fact.type],
        n=n,
    )
    if top_up_note:
        prompt += f"\n\n{top_up_note}"
    response = provider.complete(
        user_request(
            model_tag, prompt, temperature=temperature, max_new_tokens=max_new_tokens
        )
    )
    examples = _parse_examples(response.content, fact)
    if len(examples) < n:
        err = PartialOutputError(fact.id, len(examples), n)
        err.examples = examples
        raise err
    return examples[:n]


def synthesize_with_top_up(
    provider: Provider, fact: Fact, n: int, *, model_tag: str, temperature: float = 0.8
) -> list[SyntheticExample]:
    """One synthesis call plus at most one top-up; accept >= MIN_ACCEPTED."""
    try:
        return synthesize_examples(
            provider, fact, n, model_tag=model_tag, temperature=temperature
        )
    except PartialOutputError as first:
        have = list(first.examples)
        missing = n - len(have)
        try:
            more = synthesize_examples(
                provider,
                fact,
                missing,
                model_tag=model_tag,
                temperature=temperature,
                top_up_note=f"Top-up request: provide {missing} additional conversations.",
            )
        except PartialOutputError as second:
            more = list(second.examples)
        have.extend(more)
        floor = min(MIN_ACCEPTED, n)
        if len(have) < floor:
            raise PartialOutputError(fact.id, len(have), n)
        return have[:n]


def assemble_training_set(
    provider: Provider,
    conversation_id: str,
    facts: list[Fact],
    manifest: Manifest,
    out_dir: Path,
    *,
    n: int = 20,
    model_tag: str,
    temperature: float = 0.8,
) -> TrainingSet:
    """Synthesize for every fact, shuffle deterministically by the manifest
    seed, and write the training file and manifest side by side.
    """
    if not facts:
        raise ContractError("assemble_training_set with no facts")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    all_examples: list[SyntheticExample] = []
    per_fact_counts: dict[str, int] = {}
    for fact in facts:
        try:
            examples = synthesize_with_top_up(
                provider, fact, n, model_tag=model_tag, temperature=temperature
            )
        except PartialOutputError as e:
            raise AssemblyError(
                f"fact {fact.id} ({fact.name!r}) yielded only {e.parsed} usable examples"
            )
        if not examples:
            raise AssemblyError(f"fact {fact.id} ({fact.name!r}) yielded no examples")
        per_fact_counts[fact.id] = len(examples)
        all_examples.extend(examples)

    rng = random.Random(manifest.seed)
    rng.shuffle(all_examples)

    write_ndjson(
        out_dir / "training_set.ndjson",
        "synthetic_example",
        (e.to_dict() for e in all_examples),
    )
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=1), encoding="utf-8"
    )
    (out_dir / "per_fact_counts.json").write_text(
        json.dumps(per_fact_counts, indent=1, sort_keys=True), encoding="utf-8"
    )
    return TrainingSet(
        conversation_id=conversation_id,
        examples=tuple(all_examples),
        manifest=manifest,
    )
