"""Hyperparameter manifest: parsing, defaults, and the echo written next to
every training run so downstream tooling can see exactly what was used.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, asdict
from pathlib import Path

log = logging.getLogger(__name__)

# published defaults for the full-scale recipe
DEFAULTS = {
    "base_model_tag": "Qwen2.5-7B-Instruct",
    "lora_rank": 16,
    "lora_alpha": 32,
    "target_modules": ["q_proj", "k_proj", "v_proj", "o_proj"],
    "learning_rate": 2e-4,
    "optimizer": "paged_adamw_8bit+cosine",
    "warmup_fraction": 0.03,
    "batch_size": 8,
    "epochs": 8,
    "checkpoint_every_epoch": True,
    "seed": 0,
}


class ManifestError(Exception):
    pass


@dataclass(frozen=True)
class Manifest:
    base_model_tag: str
    lora_rank: int
    lora_alpha: int
    target_modules: tuple[str, ...]
    learning_rate: float
    optimizer: str
    warmup_fraction: float
    batch_size: int
    epochs: int
    checkpoint_every_epoch: bool
    seed: int

    def __post_init__(self):
        if self.lora_rank < 1 or self.lora_alpha < 1:
            raise ManifestError("lora_rank and lora_alpha must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ManifestError("batch_size and epochs must be positive")
        if not 0 <= self.warmup_fraction < 1:
            raise ManifestError("warmup_fraction must be in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_modules"] = list(self.target_modules)
        return d


def load_manifest(path: Path) -> Manifest:
    """Parse the manifest file, filling omitted fields from the published
    defaults and warning on any explicit departure from them.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"cannot read manifest {path}: {e}")
    if not isinstance(data, dict):
        raise ManifestError(f"manifest {path} is not a JSON object")
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise ManifestError(f"manifest has unknown fields: {sorted(unknown)}")
    merged = {**DEFAULTS, **data}
    for key, value in data.items():
        if key not in ("base_model_tag", "seed") and value != DEFAULTS[key]:
            log.warning(
                "manifest %s=%r departs from the published default %r",
                key,
                value,
                DEFAULTS[key],
            )
    merged["target_modules"] = tuple(merged["target_modules"])
    return Manifest(**merged)


def write_echo(manifest: Manifest, out_dir: Path) -> Path:
    """Record the fully resolved manifest beside the run's outputs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest_echo.json"
    path.write_text(
        json.dumps(manifest.to_dict(), indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return path
