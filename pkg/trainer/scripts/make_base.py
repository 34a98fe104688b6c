#!/usr/bin/env python3
"""Pretrain the bundled tiny byte-level base model.

The base learns the chat-sequence format (user turn, assistant turn, EOS)
and generic English-ish byte statistics from synthetic word-salad exchanges,
but none of the facts any adapter will later be trained on. Deterministic;
rerunning regenerates the same checkpoint.

    python3 trainer/scripts/make_base.py
"""

from __future__ import annotations

import math
import random
import sys
import time
from pathlib import Path

import torch
from torch import nn

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lora_trainer import tokenizer
from lora_trainer.model import BASE_MODELS, ModelConfig, TinyCausalLM, save_base

SEED = 1234
STEPS = 3000
BATCH = 16
LR = 3e-3
LABEL_SMOOTHING = 0.05

WORDS = (
    "the a every some this that retry limit is are three four seven attempts "
    "logs log rotate rotation sunday monday night daily weekly config file "
    "cache queue worker job schedule backup export import port path user "
    "remind me what did we settle about how do i handle please keep it brief "
    "set to on at with for and or not never always default value string "
    "number list table index server client request response error ok done "
    "quick question suppose back tomorrow wrong following task variant"
).split()

PUNCT = ["?", ".", ",", ":", "--", "(", ")", "'"]


def synth_pair(rng: random.Random) -> tuple[str, str]:
    q_words = [rng.choice(WORDS) for _ in range(rng.randint(4, 12))]
    if rng.random() < 0.3:
        q_words.insert(rng.randrange(len(q_words)), rng.choice(PUNCT))
    question = " ".join(q_words) + rng.choice(["?", "?", "."])
    a_words = [rng.choice(WORDS) for _ in range(rng.randint(3, 10))]
    # sometimes echo question words so attention learns to copy
    if rng.random() < 0.5:
        a_words[: 2] = rng.sample(q_words[: max(2, len(q_words) // 2)], 2)
    answer = " ".join(a_words) + "."
    return question, answer


def batch(sequences, pad):
    width = max(len(s) for s in sequences)
    tokens = torch.full((len(sequences), width), tokenizer.EOS, dtype=torch.long)
    labels = torch.full((len(sequences), width), pad, dtype=torch.long)
    for row, seq in enumerate(sequences):
        tokens[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
        labels[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
    return tokens, labels


def main() -> None:
    rng = random.Random(SEED)
    torch.manual_seed(SEED)
    model = TinyCausalLM(ModelConfig())
    optimizer = torch.optim.AdamW(model.parameters(), lr=LR)
    scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=STEPS)

    start = time.time()
    for step in range(STEPS):
        sequences = [
            tokenizer.encode_example(*synth_pair(rng)) for _ in range(BATCH)
        ]
        tokens, labels = batch(sequences, pad=-100)
        optimizer.zero_grad()
        logits = model(tokens)
        loss = nn.functional.cross_entropy(
            logits[:, :-1].reshape(-1, logits.shape[-1]),
            labels[:, 1:].reshape(-1),
            ignore_index=-100,
            label_smoothing=LABEL_SMOOTHING,
        )
        loss.backward()
        optimizer.step()
        scheduler.step()
        if step % 300 == 0 or step == STEPS - 1:
            print(f"step {step:4d} loss {loss.item():.3f} ({time.time() - start:.0f}s)")

    out = BASE_MODELS["tiny-byte-lm"]
    save_base(model, out)
    size = out.stat().st_size / 1024
    print(f"saved {out} ({size:.0f} KiB), final loss {loss.item():.3f}, "
          f"uniform baseline {math.log(tokenizer.VOCAB_SIZE):.2f}")


if __name__ == "__main__":
    main()
