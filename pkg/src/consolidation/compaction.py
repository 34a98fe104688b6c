"""Cascading compaction simulation: 6:1 summarization, continuation
generation, and the multi-cycle protocol producing per-cycle evaluation
contexts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import prompt_templates
from .corpus import Conversation, Turn, count_tokens
from .errors import BudgetError, ContractError, LengthError, SchemaError
from .parsing import fenced_object
from .provider import Provider, user_request

SUMMARY_SLACK = 1.2
CONTINUATION_TOLERANCE = 0.25


@dataclass(frozen=True)
class CycleState:
    cycle_index: int
    summary: str
    summary_tokens: int
    continuation: Conversation
    context_for_eval: str
    input_tokens: int  # tokens of the context this cycle summarized

    def __post_init__(self):
        bound = math.ceil(self.input_tokens / 6) * SUMMARY_SLACK
        if self.summary_tokens > bound:
            raise BudgetError(self.summary_tokens, int(bound))


def summary_target(context_tokens: int, ratio: int = 6) -> int:
    return math.ceil(context_tokens / ratio)


def summarize(
    provider: Provider,
    context: str,
    ratio: int = 6,
    *,
    model_tag: str,
) -> str:
    """Summarize ``context`` to ~1/ratio of its token count.

    One re-prompt with an explicit shorten instruction is allowed if the
    first result exceeds target * 1.2; after that, hard failure. Silent
    truncation would corrupt the experiment.
    """
    if not context:
        raise ContractError("summarize of empty context")
    target = summary_target(count_tokens(context), ratio)
    budget = target * SUMMARY_SLACK

    prompt = prompt_templates.render(
        "summarize", target_tokens=target, context=context, shorten=""
    )
    result = provider.complete(
        user_request(model_tag, prompt, max_new_tokens=max(target * 2, 512))
    ).content
    if count_tokens(result) <= budget:
        return result

    shorten = (
        f"\nYour previous summary was too long ({count_tokens(result)} tokens). "
        f"Shorten it to at most {target} tokens.\n"
    )
    prompt = prompt_templates.render(
        "summarize", target_tokens=target, context=context, shorten=shorten
    )
    result = provider.complete(
        user_request(model_tag, prompt, max_new_tokens=max(target * 2, 512))
    ).content
    if count_tokens(result) > budget:
        raise BudgetError(count_tokens(result), target)
    return result


def generate_continuation(
    provider: Provider,
    summary: str,
    target_tokens: int = 60000,
    *,
    model_tag: str,
    conversation_id: str,
    scenario: str = "",
) -> Conversation:
    """Generate a fresh conversation of new project work in the context of
    ``summary``, accepted within +/-25% of the token target.
    """
    if not summary:
        raise ContractError("generate_continuation with empty summary")
    prompt = prompt_templates.render(
        "continue", target_tokens=target_tokens, summary=summary
    )
    response = provider.complete(
        user_request(model_tag, prompt, max_new_tokens=target_tokens * 2)
    )
    data = fenced_object(response.content, "conversation")
    turns = data.get("turns")
    if not isinstance(turns, list) or not turns:
        raise SchemaError("continuation has no turns", field="turns")
    conv = Conversation.build(
        id=conversation_id,
        scenario=scenario,
        turns=(Turn.from_dict(t) for t in turns),
    )
    lo = target_tokens * (1 - CONTINUATION_TOLERANCE)
    hi = target_tokens * (1 + CONTINUATION_TOLERANCE)
    if not lo <= conv.token_count <= hi:
        raise LengthError(
            f"continuation is {conv.token_count} tokens, outside [{lo:.0f}, {hi:.0f}]"
        )
    return conv


def run_cycles(
    provider: Provider,
    original: Conversation,
    k: int = 3,
    *,
    ratio: int = 6,
    continuation_target: int = 60000,
    model_tag: str,
) -> list[CycleState]:
    """Run k compaction cycles.

    Cycle 1 summarizes the original transcript; cycle i>1 summarizes the
    previous summary plus the previous continuation. Each cycle's evaluation
    context is its summary followed by the rendered continuation.
    """
    if k < 1:
        raise ContractError("k must be >= 1")
    states: list[CycleState] = []
    context = original.rendered()
    for i in range(1, k + 1):
        input_tokens = count_tokens(context)
        summary = summarize(provider, context, ratio, model_tag=model_tag)
        continuation = generate_continuation(
            provider,
            summary,
            continuation_target,
            model_tag=model_tag,
            conversation_id=f"{original.id}/continuation-{i}",
            scenario=original.scenario,
        )
        rendered = continuation.rendered()
        states.append(
            CycleState(
                cycle_index=i,
                summary=summary,
                summary_tokens=count_tokens(summary),
                continuation=continuation,
                context_for_eval=summary + "\n\n" + rendered,
                input_tokens=input_tokens,
            )
        )
        context = summary + "\n\n" + rendered
    return states
