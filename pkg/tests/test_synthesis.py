from __future__ import annotations

import json

import pytest

from consolidation.corpus import (
    Fact,
    Manifest,
    MemoryType,
    STYLES,
    read_ndjson,
)
from consolidation.errors import AssemblyError, ContractError, PartialOutputError
from consolidation.provider import ChatResponse
from consolidation.synthesis import (
    assemble_training_set,
    synthesize_examples,
    synthesize_with_top_up,
)

import micro_fixture as mf


class FakeProvider:
    def __init__(self, contents):
        self.contents = list(contents)
        self.calls = 0

    def complete(self, request):
        self.calls += 1
        return ChatResponse(self.contents.pop(0), 1, 1)


def _examples_block(k, style="direct"):
    lines = [
        json.dumps({"style": style, "user": f"q{i}?", "assistant": f"a{i}."})
        for i in range(k)
    ]
    return "```examples\n" + "\n".join(lines) + "\n```"


HMAC_FACT = Fact(
    id="probe/hmac",
    name="one-shot hmac generation",
    type=MemoryType.PROCEDURAL,
    content=mf.ALL_FACTS["one-shot hmac generation"][1],
    source_conversation_id=mf.CONV_ID,
    extraction_pass=2,
)

PARTIAL_FACT = Fact(
    id="probe/partial",
    name=mf.PARTIAL_PROBE_NAME,
    type=MemoryType.PROCEDURAL,
    content=mf.PARTIAL_PROBE_CONTENT,
    source_conversation_id=mf.CONV_ID,
    extraction_pass=1,
)


def test_synthesize_twenty_two_message_examples(replay_provider):
    examples = synthesize_examples(
        replay_provider, HMAC_FACT, 20, model_tag="scripted-pipeline"
    )
    assert len(examples) == 20
    for e in examples:
        assert len(e.messages) == 2
        assert e.messages[0].role == "user"
        assert e.messages[1].role == "assistant"
        assert e.style in STYLES
        assert e.fact_id == HMAC_FACT.id


def test_procedural_framing_yields_correct_approach_only(replay_provider):
    # the rehearsal data must demonstrate the lesson, not the prior mistake
    examples = synthesize_examples(
        replay_provider, HMAC_FACT, 20, model_tag="scripted-pipeline"
    )
    for e in examples:
        assistant = e.messages[1].content
        assert "hmac.digest(secret, payload, hashlib.sha256)" in assistant
        assert "hmac.new(" not in assistant


def test_style_coverage(replay_provider):
    examples = synthesize_examples(
        replay_provider, HMAC_FACT, 20, model_tag="scripted-pipeline"
    )
    assert {e.style for e in examples} == set(STYLES)


def test_shortfall_raises_partial_with_parsed_examples():
    provider = FakeProvider([_examples_block(12)])
    with pytest.raises(PartialOutputError) as e:
        synthesize_examples(provider, HMAC_FACT, 20, model_tag="m")
    assert e.value.parsed == 12
    assert e.value.requested == 20
    assert len(e.value.examples) == 12


def test_top_up_recovers_shortfall(replay_provider):
    examples = synthesize_with_top_up(
        replay_provider, PARTIAL_FACT, 20, model_tag="scripted-pipeline", temperature=0.8
    )
    assert len(examples) == 20
    assert replay_provider  # both the short response and the top-up came from fixtures


def test_top_up_accepts_at_least_eighteen():
    provider = FakeProvider([_examples_block(15), _examples_block(3)])
    examples = synthesize_with_top_up(provider, HMAC_FACT, 20, model_tag="m")
    assert len(examples) == 18
    assert provider.calls == 2


def test_top_up_below_floor_fails():
    provider = FakeProvider([_examples_block(10), _examples_block(2)])
    with pytest.raises(PartialOutputError) as e:
        synthesize_with_top_up(provider, HMAC_FACT, 20, model_tag="m")
    assert e.value.parsed == 12


def test_malformed_records_are_dropped():
    lines = [
        json.dumps({"style": "direct", "user": "q?", "assistant": "a."}),
        json.dumps({"style": "freestyle", "user": "q?", "assistant": "a."}),
        json.dumps({"style": "direct", "user": "", "assistant": "a."}),
        json.dumps({"style": "direct", "user": "q2?", "assistant": "a2."}),
    ]
    block = "```examples\n" + "\n".join(lines) + "\n```"
    examples = synthesize_examples(FakeProvider([block]), HMAC_FACT, 2, model_tag="m")
    assert len(examples) == 2


def test_single_example_request():
    examples = synthesize_examples(
        FakeProvider([_examples_block(1)]), HMAC_FACT, 1, model_tag="m"
    )
    assert len(examples) == 1
    with pytest.raises(ContractError):
        synthesize_examples(FakeProvider([]), HMAC_FACT, 0, model_tag="m")


def _micro_facts(replay_provider, micro_original):
    from consolidation.reflection import extract_facts, merge_passes

    results = [
        extract_facts(replay_provider, micro_original, p, model_tag="scripted-pipeline")
        for p in (1, 2, 3)
    ]
    return merge_passes(results)


def test_assemble_training_set_ratio_and_files(tmp_path, replay_provider, micro_original):
    facts = _micro_facts(replay_provider, micro_original)
    ts = assemble_training_set(
        replay_provider,
        micro_original.id,
        facts,
        Manifest(seed=7),
        tmp_path,
        n=20,
        model_tag="scripted-pipeline",
        temperature=0.8,
    )
    ratio = len(ts.examples) / len(facts)
    assert 18 <= ratio <= 22

    rows = list(read_ndjson(tmp_path / "training_set.ndjson", "synthetic_example"))
    assert len(rows) == len(ts.examples)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 7
    counts = json.loads((tmp_path / "per_fact_counts.json").read_text())
    assert set(counts) == {f.id for f in facts}
    assert all(v == 20 for v in counts.values())


def test_assembly_shuffle_is_deterministic(tmp_path, replay_provider, micro_original):
    facts = _micro_facts(replay_provider, micro_original)
    for sub in ("a", "b"):
        assemble_training_set(
            replay_provider,
            micro_original.id,
            facts,
            Manifest(seed=7),
            tmp_path / sub,
            n=20,
            model_tag="scripted-pipeline",
            temperature=0.8,
        )
    assert (tmp_path / "a" / "training_set.ndjson").read_bytes() == (
        tmp_path / "b" / "training_set.ndjson"
    ).read_bytes()


def test_assembly_seed_changes_order(tmp_path, replay_provider, micro_original):
    facts = _micro_facts(replay_provider, micro_original)
    sets = []
    for seed in (7, 8):
        ts = assemble_training_set(
            replay_provider,
            micro_original.id,
            facts,
            Manifest(seed=seed),
            tmp_path / str(seed),
            n=20,
            model_tag="scripted-pipeline",
            temperature=0.8,
        )
        sets.append(ts.examples)
    assert sets[0] != sets[1]
    assert sorted(e.fact_id for e in sets[0]) == sorted(e.fact_id for e in sets[1])


def test_zero_usable_examples_is_assembly_error(tmp_path):
    provider = FakeProvider(["```examples\n```", "```examples\n```"])
    with pytest.raises(AssemblyError, match="0 usable"):
        assemble_training_set(
            provider, "c1", [HMAC_FACT], Manifest(seed=0), tmp_path, n=20, model_tag="m"
        )


def test_no_facts_is_contract_error(tmp_path):
    with pytest.raises(ContractError):
        assemble_training_set(
            FakeProvider([]), "c1", [], Manifest(seed=0), tmp_path, n=20, model_tag="m"
        )
