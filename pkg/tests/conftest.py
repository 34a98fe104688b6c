from __future__ import annotations

import sys
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
sys.path.insert(0, str(HERE.parent / "scripts"))

from fixture_paths import MICRO


@pytest.fixture(scope="session")
def micro_dir() -> Path:
    return MICRO


@pytest.fixture(scope="session")
def replay_provider():
    from consolidation.provider import ReplayProvider

    return ReplayProvider(MICRO / "replay")


@pytest.fixture(scope="session")
def micro_original():
    from consolidation.corpus import read_conversation

    return read_conversation(MICRO / "corpus" / "cli-tool-micro.json")


@pytest.fixture(scope="session")
def micro_questions():
    from consolidation.corpus import read_questions

    return read_questions(MICRO / "questions.ndjson")
