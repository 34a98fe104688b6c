from __future__ import annotations

import json
import math

import pytest
import torch

from lora_trainer import tokenizer
from lora_trainer.evaluate import answer_token_ces, eval_ce, greedy_decode
from lora_trainer.lora import LoRALinear, apply_lora, load_adapter, lora_parameters, save_adapter
from lora_trainer.model import (
    BaseModelUnavailable,
    ModelConfig,
    TinyCausalLM,
    load_base_by_tag,
)
from lora_trainer.records import RecordError, read_training_examples, write_records


def test_tokenizer_roundtrip_and_spans():
    seq = tokenizer.encode_example("what about retries?", "three attempts")
    assert seq[0] == tokenizer.BOS
    assert seq[1] == tokenizer.USER
    assert seq[-1] == tokenizer.EOS
    start, end = tokenizer.answer_span("what about retries?", "three attempts")
    assert end - start == len("three attempts".encode())
    assert tokenizer.decode_tokens(seq[start:end]) == "three attempts"
    assert seq[start - 1] == tokenizer.ASSISTANT


def test_tokenizer_handles_multibyte():
    text = "café — ok"
    assert tokenizer.decode_tokens(tokenizer.encode_text(text)) == text


def _tiny_model(seed=0):
    torch.manual_seed(seed)
    return TinyCausalLM(ModelConfig(d_model=32, n_heads=2, n_layers=1, d_ff=64, max_len=128))


def test_untrained_adapter_is_identity():
    model = _tiny_model()
    x = torch.randint(0, 260, (1, 16))
    before = model(x)
    apply_lora(model, ("q_proj", "k_proj", "v_proj", "o_proj"), rank=4, alpha=8)
    after = model(x)
    assert torch.allclose(before, after)


def test_only_adapter_parameters_train():
    model = _tiny_model()
    apply_lora(model, ("q_proj", "v_proj"), rank=4, alpha=8)
    trainable = {n for n, p in model.named_parameters() if p.requires_grad}
    assert trainable
    assert all("lora_" in n for n in trainable)
    assert all(("q_proj" in n) or ("v_proj" in n) for n in trainable)
    assert len(lora_parameters(model)) == len(trainable)


def test_adapter_roundtrip(tmp_path):
    model = _tiny_model()
    apply_lora(model, ("q_proj",), rank=4, alpha=8)
    with torch.no_grad():
        for p in lora_parameters(model):
            p.add_(torch.randn_like(p))
    x = torch.randint(0, 260, (1, 16))
    expected = model(x)

    save_adapter(tmp_path / "ckpt.pt", model, meta={"epoch": 3})
    fresh = _tiny_model()
    apply_lora(fresh, ("q_proj",), rank=4, alpha=8)
    meta = load_adapter(tmp_path / "ckpt.pt", fresh)
    assert meta["epoch"] == 3
    assert torch.allclose(fresh(x), expected)


def test_adapter_shape_mismatch_rejected(tmp_path):
    model = _tiny_model()
    apply_lora(model, ("q_proj",), rank=4, alpha=8)
    save_adapter(tmp_path / "ckpt.pt", model, meta={})
    other = _tiny_model()
    apply_lora(other, ("q_proj", "v_proj"), rank=4, alpha=8)
    with pytest.raises(ValueError, match="does not match"):
        load_adapter(tmp_path / "ckpt.pt", other)


def test_missing_target_module_rejected():
    with pytest.raises(ValueError, match="no target modules"):
        apply_lora(_tiny_model(), ("does_not_exist",), rank=4, alpha=8)


def test_unknown_base_tag_gives_guidance():
    with pytest.raises(BaseModelUnavailable, match="tiny-byte-lm"):
        load_base_by_tag("Qwen2.5-7B-Instruct")


def test_ce_length_matches_answer_tokens():
    model = _tiny_model()
    question, answer = "what was decided?", "three attempts"
    ces = answer_token_ces(model, question, answer)
    assert len(ces) == len(answer.encode())
    assert all(c >= 0 for c in ces)
    # a randomly initialized model sits near the uniform baseline on average
    assert sum(ces) / len(ces) < math.log(tokenizer.VOCAB_SIZE) + 0.5


def test_eval_ce_empty_answer_becomes_error_record(tmp_path):
    model = _tiny_model()
    questions = [
        {"id": "q1", "question": "a?", "expected_answer": "b"},
        {"id": "q2", "question": "c?", "expected_answer": ""},
    ]
    path = eval_ce(model, questions, 1, tmp_path / "ce.ndjson")
    lines = path.read_text().splitlines()
    records = [json.loads(x) for x in lines[1:]]
    assert "token_ces" in records[0]
    assert records[1] == {"question_id": "q2", "epoch": 1, "error": "empty expected answer"}


def test_greedy_decode_stops_and_is_deterministic():
    model = _tiny_model()
    a = greedy_decode(model, "hello?", max_new_tokens=20)
    b = greedy_decode(model, "hello?", max_new_tokens=20)
    assert a == b
    assert len(a) <= 20
    assert tokenizer.EOS not in a


def test_training_set_reader_validates(tmp_path):
    path = tmp_path / "t.ndjson"
    write_records(
        path,
        "synthetic_example",
        [{"messages": [{"role": "user", "content": "q"}], "fact_id": "f", "style": "direct"}],
    )
    with pytest.raises(RecordError, match="two messages"):
        read_training_examples(path)
    write_records(path, "wrong_schema", [])
    with pytest.raises(RecordError, match="schema"):
        read_training_examples(path)
