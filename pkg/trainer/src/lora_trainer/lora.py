"""Low-rank adapters over named linear projections.

The wrapped module computes W x + (alpha / r) * B A x with A Gaussian and
B zero at initialization, so an untrained adapter is an exact no-op. Only
A and B receive gradients; the base weights stay frozen.
"""

from __future__ import annotations

import math
from pathlib import Path

import torch
from torch import nn


class LoRALinear(nn.Module):
    def __init__(self, base: nn.Linear, rank: int, alpha: int):
        super().__init__()
        if rank < 1:
            raise ValueError("rank must be >= 1")
        self.base = base
        self.rank = rank
        self.alpha = alpha
        self.scaling = alpha / rank
        self.lora_a = nn.Parameter(torch.empty(rank, base.in_features))
        self.lora_b = nn.Parameter(torch.zeros(base.out_features, rank))
        nn.init.kaiming_uniform_(self.lora_a, a=math.sqrt(5))
        self.base.weight.requires_grad_(False)
        if self.base.bias is not None:
            self.base.bias.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + self.scaling * (x @ self.lora_a.T @ self.lora_b.T)


def apply_lora(
    model: nn.Module, target_modules: tuple[str, ...], rank: int, alpha: int
) -> list[str]:
    """Wrap every target projection in-place; returns the wrapped paths."""
    wrapped = []
    for parent_name, parent in model.named_modules():
        for child_name, child in list(parent.named_children()):
            if child_name in target_modules and isinstance(child, nn.Linear):
                setattr(parent, child_name, LoRALinear(child, rank, alpha))
                wrapped.append(
                    f"{parent_name}.{child_name}" if parent_name else child_name
                )
    if not wrapped:
        raise ValueError(f"no target modules found among {target_modules}")
    for name, param in model.named_parameters():
        param.requires_grad_("lora_" in name)
    return sorted(wrapped)


def lora_parameters(model: nn.Module) -> list[nn.Parameter]:
    return [p for n, p in model.named_parameters() if "lora_" in n]


def lora_state_dict(model: nn.Module) -> dict[str, torch.Tensor]:
    return {n: p.detach().clone() for n, p in model.named_parameters() if "lora_" in n}


def save_adapter(path: Path, model: nn.Module, meta: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"meta": meta, "lora": lora_state_dict(model)}, path)


def load_adapter(path: Path, model: nn.Module) -> dict:
    """Load adapter weights into an already-wrapped model; returns metadata."""
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    current = {n for n, _ in model.named_parameters() if "lora_" in n}
    saved = set(payload["lora"])
    if current != saved:
        raise ValueError("adapter does not match the wrapped model's projections")
    model.load_state_dict(payload["lora"], strict=False)
    return payload["meta"]
