"""Declarative run configuration.

Every experiment constant (compaction ratio, paraphrase count, extraction
passes, cycle count, epochs, answer token cap) is a config default here,
never hard-coded at call sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from pathlib import Path

import yaml

from .corpus import Manifest
from .errors import ConfigError


@dataclass
class ProviderSettings:
    mode: str = "replay"  # live | replay
    endpoint_url: str = ""
    auth_token_env_var: str = "PROVIDER_TOKEN"
    fixture_dir: str = ""
    cache_dir: str = ""
    max_concurrent: int = 4
    max_retries: int = 3
    backoff_base: float = 0.5
    # model used for reflection, synthesis, compaction and judging
    pipeline_model: str = "pipeline-model"
    # model under test (floor / ceiling / compaction answers)
    subject_model: str = "subject-model"


@dataclass
class CompactionSettings:
    cycles: int = 3
    ratio: int = 6
    continuation_target_tokens: int = 60000


@dataclass
class ReflectionSettings:
    passes: int = 3


@dataclass
class SynthesisSettings:
    n_paraphrases: int = 20
    temperature: float = 0.8


@dataclass
class EvaluateSettings:
    conditions: list[str] = field(
        default_factory=lambda: ["no_context", "full_context", "compaction:3", "consolidated:8"]
    )


@dataclass
class TrainerSettings:
    # subprocess argv prefix; receives training_set, manifest, questions, out_dir
    command: list[str] | None = None
    # pre-generated answers file for the consolidated condition (trainer export)
    answers_file: str = ""
    answers_epoch: int = 8


@dataclass
class RunConfig:
    corpus_dir: str = ""
    questions_file: str = ""
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    compaction: CompactionSettings = field(default_factory=CompactionSettings)
    reflection: ReflectionSettings = field(default_factory=ReflectionSettings)
    synthesis: SynthesisSettings = field(default_factory=SynthesisSettings)
    evaluate: EvaluateSettings = field(default_factory=EvaluateSettings)
    trainer: TrainerSettings = field(default_factory=TrainerSettings)
    manifest: Manifest = field(default_factory=Manifest)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["manifest"] = self.manifest.to_dict()
        return d


def _build(cls, data: dict, context: str):
    fields = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")
    return cls(**data)


def load_config(path: Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"unreadable config: {e}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")

    sections = {
        "provider": ProviderSettings,
        "compaction": CompactionSettings,
        "reflection": ReflectionSettings,
        "synthesis": SynthesisSettings,
        "evaluate": EvaluateSettings,
        "trainer": TrainerSettings,
    }
    kwargs: dict = {}
    for key, value in data.items():
        if key in sections:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            kwargs[key] = _build(sections[key], value, key)
        elif key == "manifest":
            kwargs["manifest"] = Manifest.from_dict(value)
        elif key in ("corpus_dir", "questions_file"):
            kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")
    config = RunConfig(**kwargs)
    if config.provider.mode not in ("live", "replay"):
        raise ConfigError(f"provider.mode must be live or replay, got {config.provider.mode!r}")
    return config


def resolve_path(base: Path, value: str) -> Path:
    """Paths in a config file are relative to the config file's directory."""
    p = Path(value)
    return p if p.is_absolute() else (base / p)
