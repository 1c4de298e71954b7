"""Content adapter: maps backbone tokens into the conditioning space.

Token count is preserved; only the per-token representation changes. The
final projection is an ordinary linear layer, so zeroing it forces all-zero
conditioning tokens (used by tests and by ablation).
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .vit import EncoderConfig, TransformerBlock


class ContentAdapter(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.in_proj = nn.Linear(config.embed_dim, config.cond_dim)
        self.blocks = nn.ModuleList(
            [TransformerBlock(config.cond_dim, config.heads) for _ in range(config.adapter_depth)])
        self.out_proj = nn.Linear(config.cond_dim, config.cond_dim)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        x = self.in_proj(tokens)
        for block in self.blocks:
            x = block(x)
        return self.out_proj(x)
