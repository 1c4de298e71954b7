"""ID-preserving conditioning encoder: ViT backbone + content adapter."""

from .adapter import ContentAdapter
from .conditioning import ConditioningTokens, IdentityEncoder, image_to_batch
from .vit import EncoderConfig, ViTBackbone, sinusoidal_features

__all__ = [
    "ContentAdapter",
    "ConditioningTokens",
    "IdentityEncoder",
    "image_to_batch",
    "EncoderConfig",
    "ViTBackbone",
    "sinusoidal_features",
]
