#!/usr/bin/env python3
"""Generate the 40-example overfit fixture: two facts, twenty paraphrased
two-message rehearsal conversations each, plus the questions file and a
desk-scale manifest. Deterministic.

    python3 trainer/scripts/make_overfit_fixture.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from lora_trainer.records import write_records

OUT = Path(__file__).resolve().parent.parent / "fixtures" / "overfit"

STYLES = ("direct", "how_to", "recall", "scenario", "negation", "task_oriented")

FACTS = {
    "fact/retry-limit": {
        "topic": "the retry limit",
        "answer": "the retry limit is three attempts",
        "type": "semantic",
    },
    "fact/log-rotation": {
        "topic": "log rotation",
        "answer": "logs rotate every sunday night",
        "type": "episodic",
    },
}

OPENERS = [
    "quick question: what did we settle about {topic}?",
    "how do i handle {topic} here?",
    "remind me, what was decided for {topic}?",
    "suppose i am back on this tomorrow -- what about {topic}?",
    "is it wrong that i forgot {topic}?",
    "please do the following: restate {topic} for me.",
    "what is the rule for {topic}?",
    "tell me again about {topic}.",
    "before i start, what about {topic}?",
    "one more time: {topic}?",
    "what did we agree on {topic}?",
    "can you restate {topic}?",
    "i lost my notes on {topic}, what was it?",
    "for the record, what is {topic} set to?",
    "what should i remember about {topic}?",
    "checking in on {topic} again?",
    "new session, same project: {topic}?",
    "help me recall {topic}.",
    "does the plan still cover {topic}?",
    "last check: what about {topic}?",
]


def main() -> None:
    examples = []
    questions = []
    for fact_id, fact in FACTS.items():
        for i, opener in enumerate(OPENERS):
            user = opener.format(topic=fact["topic"])
            examples.append(
                {
                    "fact_id": fact_id,
                    "messages": [
                        {"role": "user", "content": user},
                        {"role": "assistant", "content": fact["answer"]},
                    ],
                    "style": STYLES[i % len(STYLES)],
                }
            )
        # eval questions reuse two training phrasings verbatim: the fixture
        # measures memorization, not generalization
        for j in (0, 2):
            questions.append(
                {
                    "id": f"{fact_id}/q{j}",
                    "conversation_id": "overfit-fixture",
                    "type": fact["type"],
                    "question": OPENERS[j].format(topic=fact["topic"]),
                    "expected_answer": fact["answer"],
                }
            )

    write_records(OUT / "training_set.ndjson", "synthetic_example", examples)
    write_records(OUT / "questions.ndjson", "question", questions)
    manifest = {
        "base_model_tag": "tiny-byte-lm",
        "optimizer": "adamw+cosine",
        "learning_rate": 3e-3,
        "batch_size": 1,
        "seed": 0,
    }
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(f"wrote {len(examples)} examples and {len(questions)} questions to {OUT}")


if __name__ == "__main__":
    main()
