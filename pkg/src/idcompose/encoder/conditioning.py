"""The full conditioning encoder: backbone + adapter + learned null tokens."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..buffers import ensure_image
from ..errors import ConfigurationError, RangeError
from .adapter import ContentAdapter
from .vit import EncoderConfig, ViTBackbone

PARTS = ("backbone", "adapter")


@dataclass(frozen=True)
class ConditioningTokens:
    """(B, S, cond_dim) token batch; is_null marks the learned null set."""

    tokens: torch.Tensor
    is_null: bool = False

    def __post_init__(self):
        if self.tokens.ndim != 3:
            raise ConfigurationError(f"tokens must be (B, S, D), got {tuple(self.tokens.shape)}")
        if not torch.isfinite(self.tokens).all():
            raise RangeError("conditioning tokens contain non-finite values")


def image_to_batch(image: np.ndarray, *, dtype=torch.float32) -> torch.Tensor:
    """(H, W, 3) [0,1] array to a (1, 3, H, W) tensor."""
    img = ensure_image(image)
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))[None].to(dtype)


class IdentityEncoder(nn.Module):
    """E_u: produces ID-preserving conditioning tokens from object images.

    The null conditioning used for classifier-free guidance is a learned
    parameter token set, trained together with the adapter.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.backbone = ViTBackbone(config)
        self.adapter = ContentAdapter(config)
        self.null_tokens = nn.Parameter(torch.zeros(1, config.token_count, config.cond_dim))
        nn.init.trunc_normal_(self.null_tokens, std=0.02)

    def encode_tokens(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> backbone tokens (B, S, embed_dim)."""
        return self.backbone(images)

    def adapt(self, tokens: torch.Tensor) -> ConditioningTokens:
        return ConditioningTokens(self.adapter(tokens), is_null=False)

    def forward(self, images: torch.Tensor) -> ConditioningTokens:
        return self.adapt(self.encode_tokens(images))

    def null_conditioning(self, batch_size: int = 1) -> ConditioningTokens:
        return ConditioningTokens(self.null_tokens.expand(batch_size, -1, -1), is_null=True)

    def condition(self, image: np.ndarray, drop_prob: float, rng: np.random.Generator) -> ConditioningTokens:
        """Encode one image, replaced by the null token set with drop_prob.

        The dropout decision is drawn before any encoding, so dropped calls
        never touch the backbone.
        """
        if not 0.0 <= drop_prob <= 1.0:
            raise ConfigurationError(f"drop_prob must be in [0, 1], got {drop_prob}")
        if drop_prob > 0.0 and rng.random() < drop_prob:
            return self.null_conditioning(1)
        dtype = self.null_tokens.dtype
        return self.forward(image_to_batch(image, dtype=dtype))

    def condition_batch(self, images: torch.Tensor, drop_prob: float,
                        rng: np.random.Generator) -> ConditioningTokens:
        """Batched conditioning with independent per-example dropout.

        One backbone pass encodes everything; dropped rows are swapped for the
        null tokens afterwards. is_null is only set when every row is null.
        """
        if not 0.0 <= drop_prob <= 1.0:
            raise ConfigurationError(f"drop_prob must be in [0, 1], got {drop_prob}")
        b = images.shape[0]
        drops = rng.random(b) < drop_prob if drop_prob > 0 else np.zeros(b, dtype=bool)
        encoded = self.forward(images).tokens
        if drops.any():
            null = self.null_tokens.expand(b, -1, -1)
            sel = torch.from_numpy(drops)[:, None, None].to(images.device)
            encoded = torch.where(sel, null, encoded)
        return ConditioningTokens(encoded, is_null=bool(drops.all()))

    def set_trainable(self, part: str, trainable: bool) -> None:
        """Include or exclude a named part from optimization.

        The null tokens ride with the adapter: both belong to the
        conditioning side and train in the same phases.
        """
        if part not in PARTS:
            raise ConfigurationError(f"unknown part {part!r}; expected one of {PARTS}")
        if part == "backbone":
            params = self.backbone.parameters()
        else:
            params = list(self.adapter.parameters()) + [self.null_tokens]
        for p in params:
            p.requires_grad_(trainable)
