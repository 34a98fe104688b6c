from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from consolidation.corpus import (
    Conversation,
    Fact,
    MemoryType,
    TestQuestion,
    Turn,
    count_tokens,
    load_corpus,
    read_conversation,
    read_facts,
    read_questions,
    validate_run_inputs,
    write_conversation,
    write_facts,
    write_questions,
)
from consolidation.errors import ConflictError, IntegrityError, SchemaError
from consolidation.reference_results import DATASET_ACCOUNTING, SCENARIO_IDS

from fixture_paths import FIXTURES


def test_count_tokens_basics():
    assert count_tokens("") == 0
    assert count_tokens("abcd") == 1
    assert count_tokens("abcde") == 2


def test_count_tokens_long_transcript_calibration():
    # 51,500-token transcript under the byte rule: 4 bytes per token
    text = "x" * (51500 * 4)
    assert abs(count_tokens(text) - 51500) <= 0.15 * 51500


@given(st.text(), st.text())
def test_count_tokens_monotone_under_concatenation(a, b):
    assert count_tokens(a + b) >= max(count_tokens(a), count_tokens(b))
    assert count_tokens(a) == count_tokens(a)  # deterministic


@given(st.text(min_size=1))
def test_count_tokens_positive_on_nonempty(s):
    assert count_tokens(s) > 0


def _conv(id="c1", turns=None):
    turns = turns or [Turn("user", "hello there"), Turn("assistant", "hi, ready to work")]
    return Conversation.build(id=id, scenario="test", turns=turns)


def test_conversation_roundtrip(tmp_path):
    conv = _conv()
    write_conversation(tmp_path / "c1.json", conv)
    assert read_conversation(tmp_path / "c1.json") == conv


def test_fact_and_question_roundtrip(tmp_path):
    facts = [
        Fact("f1", "store location", MemoryType.EPISODIC, "stored in json", "c1", 1),
        Fact("f2", "snake case", MemoryType.SEMANTIC, "snake_case names", "c1", 2),
    ]
    write_facts(tmp_path / "facts.ndjson", facts)
    assert read_facts(tmp_path / "facts.ndjson") == facts

    questions = [TestQuestion("q1", "c1", MemoryType.SEMANTIC, "what?", "that")]
    write_questions(tmp_path / "q.ndjson", questions)
    assert read_questions(tmp_path / "q.ndjson") == questions


def test_turn_order_enforced():
    with pytest.raises(SchemaError, match="turn order"):
        Conversation.build(
            id="bad",
            scenario="",
            turns=[Turn("assistant", "hi"), Turn("user", "hello")],
        )


def test_leading_system_turn_allowed():
    conv = Conversation.build(
        id="sys",
        scenario="",
        turns=[Turn("system", "context"), Turn("user", "q"), Turn("assistant", "a")],
    )
    assert conv.turns[0].role == "system"


def test_empty_content_rejected():
    with pytest.raises(SchemaError):
        Turn("user", "")


def test_token_count_mismatch_rejected():
    with pytest.raises(SchemaError, match="token_count"):
        Conversation(
            id="c", scenario="", turns=(Turn("user", "hello"), Turn("assistant", "yo")), token_count=999
        )


def test_load_corpus_orders_by_id(tmp_path):
    write_conversation(tmp_path / "b.json", _conv(id="zed"))
    write_conversation(tmp_path / "a.json", _conv(id="alpha"))
    convs = load_corpus(tmp_path)
    assert [c.id for c in convs] == ["alpha", "zed"]


def test_load_corpus_duplicate_id(tmp_path):
    write_conversation(tmp_path / "x.json", _conv(id="same"))
    write_conversation(tmp_path / "y.json", _conv(id="same"))
    with pytest.raises(ConflictError):
        load_corpus(tmp_path)


def test_load_corpus_schema_error_names_file(tmp_path):
    bad = {"id": "c", "scenario": "", "turns": [{"role": "assistant", "content": "x"}, {"role": "user", "content": "y"}]}
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    with pytest.raises(SchemaError, match="turn order") as e:
        load_corpus(tmp_path)
    assert "bad.json" in str(e.value)


def test_scenario_stub_ids_match_reference_labels():
    convs = load_corpus(FIXTURES / "scenarios")
    assert [c.id for c in convs] == sorted(SCENARIO_IDS)
    labels = {c.id: c.scenario for c in convs}
    for slug, meta in DATASET_ACCOUNTING.items():
        assert labels[slug] == meta["label"]


def _reference_questions():
    questions = []
    for slug, meta in DATASET_ACCOUNTING.items():
        for mtype, count in meta["questions"].items():
            for i in range(count):
                questions.append(
                    TestQuestion(f"{slug}/{mtype}/{i}", slug, MemoryType(mtype), "q?", "a")
                )
    return questions


def test_validate_run_inputs_reference_totals():
    convs = load_corpus(FIXTURES / "scenarios")
    report = validate_run_inputs(convs, _reference_questions())
    assert report.totals == {"semantic": 184, "procedural": 154, "episodic": 808}
    assert report.total == 1146
    per = report.per_conversation["cli-developer-tool"]
    assert per == {"semantic": 16, "procedural": 11, "episodic": 75}


def test_validate_run_inputs_empty_warns():
    report = validate_run_inputs([_conv()], [])
    assert report.total == 0
    assert report.warnings


def test_validate_run_inputs_dangling_reference():
    q = TestQuestion("q1", "nope", MemoryType.SEMANTIC, "q?", "a")
    with pytest.raises(IntegrityError, match="nope"):
        validate_run_inputs([_conv()], [q])


def test_micro_corpus_loads(micro_dir, micro_questions):
    convs = load_corpus(micro_dir / "corpus")
    assert len(convs) == 1
    report = validate_run_inputs(convs, micro_questions)
    assert report.total == 10
