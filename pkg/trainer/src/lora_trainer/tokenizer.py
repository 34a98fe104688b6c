"""Byte-level tokenizer with chat-control tokens.

Tokens 0..255 are raw UTF-8 bytes; the remainder mark sequence and turn
boundaries. A two-message exchange becomes one training sequence:

    BOS  USER  <question bytes>  ASSISTANT  <answer bytes>  EOS
"""

from __future__ import annotations

BOS = 256
EOS = 257
USER = 258
ASSISTANT = 259

VOCAB_SIZE = 260


def encode_text(text: str) -> list[int]:
    return list(text.encode("utf-8"))


def decode_tokens(tokens: list[int]) -> str:
    return bytes(t for t in tokens if t < 256).decode("utf-8", errors="replace")


def encode_example(user: str, assistant: str) -> list[int]:
    """Full supervised sequence for one two-message exchange."""
    return (
        [BOS, USER]
        + encode_text(user)
        + [ASSISTANT]
        + encode_text(assistant)
        + [EOS]
    )


def encode_prompt(user: str) -> list[int]:
    """Generation prompt: everything up to where the answer starts."""
    return [BOS, USER] + encode_text(user) + [ASSISTANT]


def answer_span(user: str, assistant: str) -> tuple[int, int]:
    """Index range [start, end) of the answer bytes inside encode_example."""
    start = len(encode_prompt(user))
    return start, start + len(encode_text(assistant))
