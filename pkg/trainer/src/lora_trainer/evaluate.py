"""Checkpoint evaluation: per-token CE over expected answers, and greedy
answer generation in the schema the pipeline's evaluation stage ingests.
"""

from __future__ import annotations

import logging
from pathlib import Path

import torch

from . import tokenizer
from .records import write_records

log = logging.getLogger(__name__)

MAX_NEW_TOKENS = 512


@torch.no_grad()
def answer_token_ces(model, question: str, expected_answer: str) -> list[float]:
    """Per-token cross-entropy (nats) of the expected answer, teacher-forced
    with the question as prompt. Prompt tokens are excluded; the list length
    equals the tokenizer's count of the expected answer.
    """
    tokens = tokenizer.encode_example(question, expected_answer)
    start, end = tokenizer.answer_span(question, expected_answer)
    x = torch.tensor([tokens], dtype=torch.long)
    logits = model(x)[0]
    logprobs = torch.log_softmax(logits, dim=-1)
    # the token at position i is predicted by the logits at position i - 1
    ces = [
        -logprobs[i - 1, tokens[i]].item()
        for i in range(start, end)
    ]
    return ces


@torch.no_grad()
def eval_ce(model, questions: list[dict], epoch: int, out_file: Path) -> Path:
    """Write one ce_log record per question; empty expected answers become
    error records rather than empty token lists.
    """
    records = []
    for q in questions:
        if not q["expected_answer"]:
            records.append(
                {"question_id": q["id"], "epoch": epoch, "error": "empty expected answer"}
            )
            continue
        ces = answer_token_ces(model, q["question"], q["expected_answer"])
        records.append({"question_id": q["id"], "epoch": epoch, "token_ces": ces})
    write_records(out_file, "ce_log", records)
    return out_file


@torch.no_grad()
def greedy_decode(model, question: str, max_new_tokens: int = MAX_NEW_TOKENS) -> list[int]:
    tokens = tokenizer.encode_prompt(question)
    generated: list[int] = []
    for _ in range(max_new_tokens):
        if len(tokens) + len(generated) >= model.config.max_len:
            break
        x = torch.tensor([tokens + generated], dtype=torch.long)
        next_token = int(model(x)[0, -1].argmax())
        if next_token == tokenizer.EOS:
            break
        generated.append(next_token)
    return generated


@torch.no_grad()
def generate_answers(model, questions: list[dict], epoch: int, out_file: Path) -> Path:
    """Greedy answers (temperature 0, up to 512 new tokens, no system
    prompt), written in the Answer record schema.
    """
    records = []
    for q in questions:
        try:
            generated = greedy_decode(model, q["question"])
            text = tokenizer.decode_tokens(generated)
            record = {
                "question_id": q["id"],
                "condition": f"consolidated:{epoch}",
                "text": text,
                "completion_tokens": len(generated),
            }
            if not text:
                record["error"] = "empty decode"
        except Exception as e:  # a single bad question must not sink the file
            log.warning("decode failed for %s: %s", q["id"], e)
            record = {
                "question_id": q["id"],
                "condition": f"consolidated:{epoch}",
                "text": "",
                "completion_tokens": 0,
                "error": str(e),
            }
        records.append(record)
    write_records(out_file, "answer", records)
    return out_file
