"""Adapter training loop: low-rank adapters over the attention projections,
one checkpoint per epoch, CE logs and greedy answer exports alongside.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn

from . import tokenizer
from .evaluate import eval_ce, generate_answers
from .lora import apply_lora, lora_parameters, save_adapter
from .manifest import Manifest, load_manifest, write_echo
from .model import load_base_by_tag
from .records import read_questions, read_training_examples

log = logging.getLogger(__name__)

PAD = -100  # ignore index for padded label positions


@dataclass(frozen=True)
class CheckpointRecord:
    epoch: int
    checkpoint_path: str
    train_loss: float


def _batches(
    sequences: list[tuple[list[int], int]], batch_size: int, rng: random.Random
):
    """Yield (tokens, labels) batches. Labels cover the assistant turn and
    its end-of-sequence token only; prompt and padding positions are masked,
    matching the CE evaluation target.
    """
    order = list(range(len(sequences)))
    rng.shuffle(order)
    for i in range(0, len(order), batch_size):
        chunk = [sequences[j] for j in order[i : i + batch_size]]
        width = max(len(s) for s, _ in chunk)
        tokens = torch.full((len(chunk), width), tokenizer.EOS, dtype=torch.long)
        labels = torch.full((len(chunk), width), PAD, dtype=torch.long)
        for row, (seq, answer_start) in enumerate(chunk):
            tokens[row, : len(seq)] = torch.tensor(seq, dtype=torch.long)
            labels[row, answer_start : len(seq)] = torch.tensor(
                seq[answer_start:], dtype=torch.long
            )
        yield tokens, labels


def _loss(model: nn.Module, tokens: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    logits = model(tokens)
    return nn.functional.cross_entropy(
        logits[:, :-1].reshape(-1, logits.shape[-1]),
        labels[:, 1:].reshape(-1),
        ignore_index=PAD,
    )


def _lr_factor(step: int, total_steps: int, warmup_fraction: float) -> float:
    warmup = max(1, int(total_steps * warmup_fraction))
    if step < warmup:
        return (step + 1) / warmup
    progress = (step - warmup) / max(1, total_steps - warmup)
    return 0.5 * (1 + math.cos(math.pi * progress))


def train(
    training_set_file: Path,
    manifest_file: Path,
    questions_file: Path,
    out_dir: Path,
) -> list[CheckpointRecord]:
    """Fine-tune adapters per the manifest; after every epoch, save the
    adapter checkpoint, log per-token CE over the test questions, and export
    greedy answers. Deterministic on CPU for a fixed manifest seed.
    """
    manifest = load_manifest(manifest_file)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_echo(manifest, out_dir)

    examples = read_training_examples(training_set_file)
    questions = read_questions(questions_file)

    torch.manual_seed(manifest.seed)
    torch.use_deterministic_algorithms(True)
    model = load_base_by_tag(manifest.base_model_tag)
    wrapped = apply_lora(
        model, manifest.target_modules, manifest.lora_rank, manifest.lora_alpha
    )
    log.info("adapters on %d projections: %s", len(wrapped), ", ".join(wrapped))

    sequences = [
        (tokenizer.encode_example(u, a), tokenizer.answer_span(u, a)[0])
        for u, a in examples
    ]
    too_long = [i for i, (s, _) in enumerate(sequences) if len(s) > model.config.max_len]
    if too_long:
        raise ValueError(
            f"{len(too_long)} training sequences exceed the base model's "
            f"context window ({model.config.max_len} tokens); shorten the "
            "examples or use a larger base model"
        )

    # the manifest names the full-scale optimizer recipe; at desk scale the
    # same schedule runs on plain AdamW
    if manifest.optimizer not in ("paged_adamw_8bit+cosine", "adamw+cosine"):
        raise ValueError(f"unsupported optimizer {manifest.optimizer!r}")
    optimizer = torch.optim.AdamW(lora_parameters(model), lr=manifest.learning_rate)
    steps_per_epoch = math.ceil(len(sequences) / manifest.batch_size)
    total_steps = steps_per_epoch * manifest.epochs
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer,
        lambda step: _lr_factor(step, total_steps, manifest.warmup_fraction),
    )

    records: list[CheckpointRecord] = []
    rng = random.Random(manifest.seed)
    for epoch in range(1, manifest.epochs + 1):
        model.train()
        losses = []
        for tokens, labels in _batches(sequences, manifest.batch_size, rng):
            optimizer.zero_grad()
            loss = _loss(model, tokens, labels)
            loss.backward()
            optimizer.step()
            scheduler.step()
            losses.append(loss.item())
        train_loss = sum(losses) / len(losses)
        model.eval()

        checkpoint = out_dir / f"checkpoint_epoch_{epoch}.pt"
        save_adapter(
            checkpoint,
            model,
            meta={
                "epoch": epoch,
                "train_loss": train_loss,
                "manifest": manifest.to_dict(),
            },
        )
        eval_ce(model, questions, epoch, out_dir / f"ce_epoch_{epoch}.ndjson")
        generate_answers(
            model, questions, epoch, out_dir / f"answers_epoch_{epoch}.ndjson"
        )
        records.append(CheckpointRecord(epoch, str(checkpoint), train_loss))
        log.info("epoch %d/%d train_loss=%.4f", epoch, manifest.epochs, train_loss)

    (out_dir / "train_log.json").write_text(
        json.dumps(
            [r.__dict__ for r in records],
            indent=1,
        )
        + "\n",
        encoding="utf-8",
    )
    return records
