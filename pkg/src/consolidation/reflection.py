"""Fact extraction from conversations: repeated LLM passes, merged by
union with name-based deduplication.

Pass independence comes from a pass-specific nonce in the prompt, which
changes the request digest (and therefore dodges the provider cache)
without changing the instructions.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from . import prompt_templates
from .corpus import Conversation, Fact, MemoryType
from .errors import ContractError, ExtractionParseError
from .parsing import fenced_records
from .provider import Provider, user_request

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionPassResult:
    conversation_id: str
    pass_index: int
    facts: tuple[Fact, ...]

    def __post_init__(self):
        for f in self.facts:
            if f.extraction_pass != self.pass_index:
                raise ContractError("fact pass index does not match result")
            if f.source_conversation_id != self.conversation_id:
                raise ContractError("fact conversation id does not match result")


def normalize_name(name: str) -> str:
    """Dedupe key: lowercase, trim, collapse internal whitespace."""
    return " ".join(name.lower().split())


def extract_facts(
    provider: Provider,
    conversation: Conversation,
    pass_index: int,
    *,
    model_tag: str,
    max_new_tokens: int = 4096,
) -> ExtractionPassResult:
    """Run one extraction pass over a conversation."""
    prompt = prompt_templates.render(
        "reflect",
        nonce=f"{conversation.id}-pass-{pass_index}",
        transcript=conversation.rendered(),
    )
    response = provider.complete(
        user_request(model_tag, prompt, max_new_tokens=max_new_tokens)
    )
    records = fenced_records(response.content, "facts")
    facts = []
    for i, rec in enumerate(records):
        if not isinstance(rec.get("name"), str) or not isinstance(rec.get("content"), str):
            raise ExtractionParseError("fact record missing name/content", str(rec))
        if rec.get("type") not in (m.value for m in MemoryType):
            raise ExtractionParseError("fact record has missing or unknown type", str(rec))
        facts.append(
            Fact(
                id=f"{conversation.id}/p{pass_index}/{i}",
                name=rec["name"],
                type=MemoryType(rec["type"]),
                content=rec["content"],
                source_conversation_id=conversation.id,
                extraction_pass=pass_index,
            )
        )
    if not facts:
        log.warning(
            "extraction pass %d over %s produced zero facts", pass_index, conversation.id
        )
    return ExtractionPassResult(
        conversation_id=conversation.id, pass_index=pass_index, facts=tuple(facts)
    )


def merge_passes(passes: list[ExtractionPassResult]) -> list[Fact]:
    """Union of all passes, deduplicated by normalized fact name.

    On collision the fact from the lowest pass index wins. Output is sorted
    by normalized name, making the merge order-independent and idempotent.
    """
    if not passes:
        return []
    conv_ids = {p.conversation_id for p in passes}
    if len(conv_ids) > 1:
        raise ContractError(f"merge_passes across conversations: {sorted(conv_ids)}")
    chosen: dict[str, Fact] = {}
    for result in sorted(passes, key=lambda p: p.pass_index):
        for fact in result.facts:
            key = normalize_name(fact.name)
            if key not in chosen:
                chosen[key] = fact
    return [chosen[k] for k in sorted(chosen)]


def build_fact_inventory(
    provider: Provider,
    original: Conversation,
    continuations: list[Conversation],
    *,
    model_tag: str,
    passes: int = 3,
) -> list[Fact]:
    """Extract-and-merge every conversation, then concatenate inventories.

    No cross-conversation dedupe: different conversations may legitimately
    restate a fact, and that redundancy is desirable downstream.
    """
    inventory: list[Fact] = []
    for conv in [original, *continuations]:
        results = [
            extract_facts(provider, conv, p, model_tag=model_tag)
            for p in range(1, passes + 1)
        ]
        inventory.extend(merge_passes(results))
    return inventory
