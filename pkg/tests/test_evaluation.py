from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from consolidation.corpus import MemoryType, TestQuestion
from consolidation.errors import IngestError, SchemaError
from consolidation.evaluation import (
    ANSWER_MAX_NEW_TOKENS,
    Answer,
    Condition,
    EvalArtifacts,
    Judgment,
    build_prompt,
    collect_answers,
    ingest_answers,
    judge,
    parse_verdict,
    score,
    write_answers,
)
from consolidation.provider import ChatResponse

import micro_fixture as mf


def test_condition_names_roundtrip():
    for text in ("no_context", "full_context", "compaction:2", "consolidated:8"):
        assert Condition.parse(text).name == text


def test_condition_validation():
    with pytest.raises(SchemaError):
        Condition("compaction", cycle=4)
    with pytest.raises(SchemaError):
        Condition("consolidated")
    with pytest.raises(SchemaError):
        Condition("mystery")


def _artifacts(micro_original):
    return EvalArtifacts(
        originals={micro_original.id: micro_original},
        cycle_contexts={micro_original.id: {1: "cycle one context", 2: "cycle two context"}},
    )


def test_prompt_system_message_per_condition(micro_original, micro_questions):
    q = micro_questions[0]
    artifacts = _artifacts(micro_original)

    no_ctx = build_prompt(Condition.parse("no_context"), q, artifacts, model_tag="m")
    assert [m.role for m in no_ctx.messages] == ["user"]

    consolidated = build_prompt(
        Condition.parse("consolidated:8"), q, artifacts, model_tag="m"
    )
    assert [m.role for m in consolidated.messages] == ["user"]

    full = build_prompt(Condition.parse("full_context"), q, artifacts, model_tag="m")
    assert [m.role for m in full.messages] == ["system", "user"]
    assert full.messages[0].content == micro_original.rendered()

    compaction = build_prompt(
        Condition.parse("compaction:2"), q, artifacts, model_tag="m"
    )
    assert compaction.messages[0].content == "cycle two context"

    for req in (no_ctx, consolidated, full, compaction):
        assert req.temperature == 0.0
        assert req.max_new_tokens == ANSWER_MAX_NEW_TOKENS
        assert req.messages[-1].content == q.question


def test_collect_answers_replay(replay_provider, micro_original, micro_questions):
    artifacts = _artifacts(micro_original)
    answers = collect_answers(
        replay_provider,
        Condition.parse("no_context"),
        micro_questions,
        artifacts,
        model_tag="scripted-subject",
    )
    assert len(answers) == len(micro_questions)
    assert all(a.condition == "no_context" for a in answers)
    assert all(a.text == mf.MISS_ANSWER for a in answers)


def test_full_context_answers_contain_expected(replay_provider, micro_original, micro_questions):
    answers = collect_answers(
        replay_provider,
        Condition.parse("full_context"),
        micro_questions,
        _artifacts(micro_original),
        model_tag="scripted-subject",
    )
    by_id = {q.id: q for q in micro_questions}
    for a in answers:
        assert by_id[a.question_id].expected_answer in a.text


def test_parse_verdict():
    assert parse_verdict("reasoning...\nVERDICT: PASS") == "pass"
    assert parse_verdict("reasoning...\nVERDICT: FAIL\n\n") == "fail"
    assert parse_verdict("VERDICT: MAYBE") is None
    assert parse_verdict("the verdict is pass") is None
    assert parse_verdict("") is None
    # verdict must be the final line, not buried mid-output
    assert parse_verdict("VERDICT: PASS\nbut on reflection...") is None


def test_judge_pass_and_fail_replay(replay_provider, micro_questions):
    q = micro_questions[0]
    good = Answer(q.id, "full_context", f"Based on the session notes: {q.expected_answer}.", 8)
    bad = Answer(q.id, "no_context", mf.MISS_ANSWER, 8)
    assert judge(replay_provider, q, good, judge_model_tag="scripted-pipeline").verdict == "pass"
    assert judge(replay_provider, q, bad, judge_model_tag="scripted-pipeline").verdict == "fail"


def test_judge_unparseable_output_becomes_error(replay_provider):
    answer = Answer(mf.PROBE_QUESTION.id, "no_context", mf.PROBE_ANSWER_TEXT, 8)
    judgment = judge(
        replay_provider, mf.PROBE_QUESTION, answer, judge_model_tag="scripted-pipeline"
    )
    assert judgment.verdict == "error"
    assert "VERDICT" not in judgment.judge_raw


def test_judge_retries_change_the_request():
    class CountingProvider:
        def __init__(self):
            self.prompts = []

        def complete(self, request):
            self.prompts.append(request.messages[-1].content)
            return ChatResponse("no verdict here", 1, 1)

    provider = CountingProvider()
    q = mf.QUESTIONS[0]
    judgment = judge(provider, q, Answer(q.id, "no_context", "x", 1),
                     judge_model_tag="m", max_retries=2)
    assert judgment.verdict == "error"
    assert len(provider.prompts) == 3
    assert len(set(provider.prompts)) == 3  # each retry dodges the cache


def _q(qid, conv, mtype):
    return TestQuestion(qid, conv, mtype, f"{qid}?", "x")


def test_score_arithmetic():
    questions = [_q(f"q{i}", "c1", MemoryType.SEMANTIC) for i in range(5)]
    judgments = [
        Judgment("q0", "x", "pass", ""),
        Judgment("q1", "x", "pass", ""),
        Judgment("q2", "x", "pass", ""),
        Judgment("q3", "x", "fail", ""),
    ]
    record = score(judgments, questions)
    assert record.accuracy["c1"]["semantic"] == 75.0
    assert record.accuracy["c1"]["overall"] == 75.0
    assert record.error_rate["c1"]["overall"] == 0.0


def test_score_errors_excluded_from_denominator():
    questions = [_q(f"q{i}", "c1", MemoryType.EPISODIC) for i in range(5)]
    judgments = [
        Judgment("q0", "x", "pass", ""),
        Judgment("q1", "x", "pass", ""),
        Judgment("q2", "x", "pass", ""),
        Judgment("q3", "x", "fail", ""),
        Judgment("q4", "x", "error", ""),
    ]
    record = score(judgments, questions)
    assert record.accuracy["c1"]["episodic"] == 75.0
    assert record.error_rate["c1"]["episodic"] == 20.0
    assert record.counts["c1"]["episodic"] == {"pass": 3, "fail": 1, "error": 1}


def test_score_missing_category_is_none():
    questions = [_q("q0", "c1", MemoryType.SEMANTIC)]
    record = score([Judgment("q0", "x", "pass", "")], questions)
    assert record.accuracy["c1"]["procedural"] is None
    assert record.accuracy["c1"]["semantic"] == 100.0


@given(st.permutations(list(range(8))))
def test_score_is_permutation_invariant(order):
    mtypes = [MemoryType.SEMANTIC, MemoryType.PROCEDURAL, MemoryType.EPISODIC]
    questions = [_q(f"q{i}", f"c{i % 2}", mtypes[i % 3]) for i in range(8)]
    verdicts = ["pass", "fail", "pass", "error", "fail", "pass", "pass", "fail"]
    judgments = [Judgment(f"q{i}", "x", verdicts[i], "") for i in range(8)]
    base = score(judgments, questions)
    shuffled = score([judgments[i] for i in order], questions)
    assert shuffled.accuracy == base.accuracy
    assert shuffled.error_rate == base.error_rate


def test_ingest_answers_roundtrip(tmp_path, micro_questions):
    answers = [Answer(q.id, "consolidated:8", "text", 1) for q in micro_questions]
    write_answers(tmp_path / "a.ndjson", answers)
    loaded = ingest_answers(
        tmp_path / "a.ndjson", Condition.parse("consolidated:3"), micro_questions
    )
    # condition is restamped from the caller, not trusted from the file
    assert all(a.condition == "consolidated:3" for a in loaded)


def test_ingest_answers_unknown_question(tmp_path, micro_questions):
    answers = [Answer("nope", "consolidated:8", "text", 1)]
    write_answers(tmp_path / "a.ndjson", answers)
    with pytest.raises(IngestError, match="nope"):
        ingest_answers(tmp_path / "a.ndjson", Condition.parse("consolidated:8"), micro_questions)


def test_ingest_answers_missing_question(tmp_path, micro_questions):
    answers = [Answer(q.id, "consolidated:8", "text", 1) for q in micro_questions[:-1]]
    write_answers(tmp_path / "a.ndjson", answers)
    with pytest.raises(IngestError, match=micro_questions[-1].id):
        ingest_answers(tmp_path / "a.ndjson", Condition.parse("consolidated:8"), micro_questions)
