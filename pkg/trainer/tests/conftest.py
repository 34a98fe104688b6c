from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from overfit_data import FIXTURES


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory):
    """One full training run over the 40-example fixture, shared by every
    test that inspects its outputs."""
    from lora_trainer.train import train

    out_dir = tmp_path_factory.mktemp("overfit")
    records = train(
        FIXTURES / "training_set.ndjson",
        FIXTURES / "manifest.json",
        FIXTURES / "questions.ndjson",
        out_dir,
    )
    return out_dir, records
