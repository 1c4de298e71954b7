"""Feature extractors and exact second-order feature statistics.

No pretrained perception model exists at this scale, so realism statistics
use a fixed seed-initialized convolutional extractor (random features keep
relative ordering between image sets), while identity similarity uses the
class token of a trained encoder.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import cv2
import numpy as np
import torch
import torch.nn.functional as F

from ..buffers import ensure_image
from ..encoder.conditioning import IdentityEncoder
from ..errors import ConfigurationError, DegenerateEmbeddingError
from ..seeding import rng_for


@dataclass(frozen=True)
class FeatureStats:
    """Exact count / mean / covariance of one feature set."""
    count: int
    mean: np.ndarray
    cov: np.ndarray


def _to_batch(images, size: int) -> np.ndarray:
    out = []
    for i, image in enumerate(images):
        image = ensure_image(image, name=f"images[{i}]")
        if image.shape[:2] != (size, size):
            image = np.clip(cv2.resize(image, (size, size),
                                       interpolation=cv2.INTER_LINEAR), 0.0, 1.0)
        out.append(image.astype(np.float32))
    if not out:
        raise ConfigurationError("feature extraction needs at least one image")
    return np.stack(out)


class RandomConvExtractor:
    """Fixed random convolutional features; weights derive from the seed."""

    def __init__(self, dim: int = 32, input_size: int = 16, seed: int = 0):
        if dim < 1 or input_size < 4:
            raise ConfigurationError("dim must be >= 1 and input_size >= 4")
        self.dim = dim
        self.input_size = input_size
        self.seed = seed
        rng = rng_for("feature-extractor", seed)

        def weight(*shape, fan_in):
            w = rng.standard_normal(shape) / np.sqrt(fan_in)
            return torch.from_numpy(w.astype(np.float32))

        self._w1 = weight(16, 3, 3, 3, fan_in=3 * 9)
        self._w2 = weight(32, 16, 3, 3, fan_in=16 * 9)
        self._proj = weight(dim, 32, fan_in=32)

    @property
    def name(self) -> str:
        return f"randconv-{self.dim}d-{self.input_size}px-seed{self.seed}"

    def __call__(self, images) -> np.ndarray:
        batch = _to_batch(images, self.input_size)
        x = torch.from_numpy(batch.transpose(0, 3, 1, 2))
        with torch.no_grad():
            x = F.gelu(F.conv2d(x, self._w1, stride=2, padding=1))
            x = F.gelu(F.conv2d(x, self._w2, stride=2, padding=1))
            x = x.mean(dim=(2, 3))
            x = F.linear(x, self._proj)
        return x.numpy().astype(np.float64)


class ClassTokenExtractor:
    """Class-token embeddings from a trained encoder backbone."""

    def __init__(self, encoder: IdentityEncoder):
        self.encoder = encoder
        self.dim = encoder.config.embed_dim
        self.input_size = encoder.config.image_size

    @property
    def name(self) -> str:
        return f"class-token-{self.dim}d-{self.input_size}px"

    def __call__(self, images) -> np.ndarray:
        batch = _to_batch(images, self.input_size)
        x = torch.from_numpy(batch.transpose(0, 3, 1, 2))
        with torch.no_grad():
            tokens = self.encoder.encode_tokens(x)
        return tokens[:, 0, :].numpy().astype(np.float64)


def feature_stats(images, extractor) -> FeatureStats:
    """Exact two-pass statistics, order-independent up to float rounding."""
    feats = extractor(images)
    n, d = feats.shape
    if n < 2:
        raise ConfigurationError("feature statistics need at least two images")
    if n < d + 1:
        warnings.warn(f"only {n} samples for {d}-dim features; "
                      "covariance is rank-deficient", stacklevel=2)
    mean = feats.mean(axis=0)
    centered = feats - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return FeatureStats(count=n, mean=mean, cov=cov)


def similarity_score(generated_crop: np.ndarray, reference_crop: np.ndarray,
                     extractor) -> float:
    """100 times the cosine similarity of the two crop embeddings."""
    emb = extractor([generated_crop, reference_crop])
    norms = np.linalg.norm(emb, axis=1)
    if np.any(norms < 1e-12):
        raise DegenerateEmbeddingError("zero-norm embedding in similarity_score")
    return float(100.0 * emb[0] @ emb[1] / (norms[0] * norms[1]))
