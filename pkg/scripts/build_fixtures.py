#!/usr/bin/env python3
"""Build the bundled micro-fixture set: corpus, questions, consolidated
answers file, config, scenario stubs, and the recorded replay fixtures that
make every test and the end-to-end dry run fully offline.

Idempotent: wipes and regenerates fixtures/ deterministically. Run from the
repo root after changing prompts or fixture definitions:

    python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import micro_fixture as mf

from consolidation.compaction import run_cycles
from consolidation.config import load_config
from consolidation.corpus import (
    Conversation,
    Fact,
    MemoryType,
    Turn,
    count_tokens,
    write_conversation,
    write_ndjson,
    write_questions,
)
from consolidation.evaluation import Answer, Condition, judge
from consolidation.provider import RecordingProvider
from consolidation.reference_results import DATASET_ACCOUNTING
from consolidation.runner import Run
from consolidation.synthesis import synthesize_with_top_up

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
MICRO = FIXTURES / "micro"

CONFIG_YAML = """\
corpus_dir: corpus
questions_file: questions.ndjson
provider:
  mode: replay
  fixture_dir: replay
  pipeline_model: scripted-pipeline
  subject_model: scripted-subject
compaction:
  cycles: 1
  ratio: 6
  continuation_target_tokens: 2000
reflection:
  passes: 3
synthesis:
  n_paraphrases: 20
  temperature: 0.8
evaluate:
  conditions: [no_context, full_context, "compaction:1", "consolidated:8"]
trainer:
  answers_file: answers_consolidated_epoch8.ndjson
  answers_epoch: 8
manifest:
  seed: 7
"""


def build_inputs() -> None:
    original = mf.original_conversation()
    write_conversation(MICRO / "corpus" / f"{original.id}.json", original)
    write_questions(MICRO / "questions.ndjson", mf.QUESTIONS)

    answers = []
    for q in mf.QUESTIONS:
        if q.id in mf.CONSOLIDATED_PASS_IDS:
            text = f"Based on what I learned: {q.expected_answer}."
        else:
            text = mf.CONSOLIDATED_MISS
        answers.append(
            Answer(q.id, "consolidated:8", text, count_tokens(text)).to_dict()
        )
    write_ndjson(MICRO / "answers_consolidated_epoch8.ndjson", "answer", answers)
    (MICRO / "config.yaml").write_text(CONFIG_YAML, encoding="utf-8")

    # transcript invariants the hand-computed report cells depend on
    text = original.text
    for q in mf.QUESTIONS:
        assert q.expected_answer in text, f"original must contain {q.expected_answer!r}"


def check_leaks(run_dir: Path) -> None:
    for path in run_dir.glob("compact/*/cycle_*/summary.txt"):
        summary = path.read_text(encoding="utf-8")
        for phrase in mf.LEAK_FORBIDDEN:
            assert phrase not in summary, f"{phrase!r} leaked into {path}"
    for path in run_dir.glob("compact/*/cycle_*/continuation.json"):
        body = path.read_text(encoding="utf-8")
        for phrase in mf.LEAK_FORBIDDEN:
            assert phrase not in body, f"{phrase!r} leaked into {path}"


def record_pipeline(provider) -> None:
    config = load_config(MICRO / "config.yaml")
    with tempfile.TemporaryDirectory() as tmp:
        run = Run(Path(tmp) / "run", config, config_base=MICRO)
        run._provider = provider
        run.run_all()
        check_leaks(run.run_dir)


def record_extras(provider) -> None:
    original = mf.original_conversation()

    # three-cycle compaction chain for the cycle-protocol property tests
    run_cycles(
        provider,
        original,
        3,
        ratio=6,
        continuation_target=2000,
        model_tag="scripted-pipeline",
    )

    # judge output with no VERDICT line, three attempts -> verdict=error
    probe_answer = Answer(
        mf.PROBE_QUESTION.id, "no_context", mf.PROBE_ANSWER_TEXT, 8
    )
    verdict = judge(
        provider, mf.PROBE_QUESTION, probe_answer, judge_model_tag="scripted-pipeline"
    )
    assert verdict.verdict == "error", verdict

    # synthesis shortfall followed by a successful top-up
    fact = Fact(
        id="probe/partial",
        name=mf.PARTIAL_PROBE_NAME,
        type=MemoryType.PROCEDURAL,
        content=mf.PARTIAL_PROBE_CONTENT,
        source_conversation_id=mf.CONV_ID,
        extraction_pass=1,
    )
    examples = synthesize_with_top_up(
        provider, fact, 20, model_tag="scripted-pipeline", temperature=0.8
    )
    assert len(examples) == 20


def build_scenario_stubs() -> None:
    out = FIXTURES / "scenarios"
    for slug, meta in DATASET_ACCOUNTING.items():
        conv = Conversation.build(
            id=slug,
            scenario=meta["label"],
            turns=[
                Turn("user", f"Kicking off the {meta['label']} project today."),
                Turn("assistant", "Noted. Starting with a short plan, then code."),
            ],
        )
        write_conversation(out / f"{slug}.json", conv)


def main() -> None:
    if FIXTURES.exists():
        shutil.rmtree(FIXTURES)
    build_inputs()
    build_scenario_stubs()
    provider = RecordingProvider(mf.ScriptedProvider(), MICRO / "replay")
    record_pipeline(provider)
    record_extras(provider)
    n = len(list((MICRO / "replay").glob("*.json")))
    print(f"recorded {n} replay fixtures under {MICRO / 'replay'}")


if __name__ == "__main__":
    main()
