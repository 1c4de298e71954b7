"""Procedural sprite dataset: multi-view sets for stage 1, scene sets for stage 2.

Every sprite is a star-convex support (superellipse or radial blob) carrying a
two-color texture defined in the object's own frame, so the texture rotates
with the object across views. Determinism: all randomness flows through
per-object / per-scene derived streams, so output bytes depend only on
(config, out_dir-relative layout), not on generation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..buffers import save_image, save_mask
from ..errors import ConfigurationError
from ..seeding import rng_for
from .manifest import MANIFEST_NAME, ManifestRecord, write_manifest

SHAPE_KINDS = ("superellipse", "blob", "bar")
TEXTURE_KINDS = ("stripes", "rings", "checker")


@dataclass(frozen=True)
class SyntheticConfig:
    num_objects: int = 4
    views_per_object: int = 6
    num_scenes: int = 2
    frames_per_scene: int = 10
    image_size: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_objects < 0 or self.num_scenes < 0:
            raise ConfigurationError("object and scene counts must be non-negative")
        if self.num_objects and self.views_per_object < 1:
            raise ConfigurationError("views_per_object must be >= 1")
        if self.num_scenes and self.frames_per_scene < 1:
            raise ConfigurationError("frames_per_scene must be >= 1")
        if self.image_size < 8:
            raise ConfigurationError("image_size must be >= 8")


@dataclass(frozen=True)
class _SpriteParams:
    shape: str
    aspect: float  # semi-axis ratio b/a
    exponent: float  # superellipse exponent
    blob_amp: tuple[float, ...]  # fourier radius modulation amplitudes
    blob_phase: tuple[float, ...]
    texture: str
    frequency: float  # texture cycles across the sprite radius
    phase: float
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]


def _sample_colors(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    ca = rng.uniform(0.1, 0.95, size=3)
    cb = rng.uniform(0.1, 0.95, size=3)
    if np.abs(ca - cb).sum() < 0.6:
        # too similar to read as a two-tone texture; push apart deterministically
        cb = np.clip(1.0 - ca, 0.05, 0.95)
    return ca, cb


def _sample_sprite(rng: np.random.Generator) -> _SpriteParams:
    shape = SHAPE_KINDS[int(rng.integers(len(SHAPE_KINDS)))]
    texture = TEXTURE_KINDS[int(rng.integers(len(TEXTURE_KINDS)))]
    amps = tuple(float(a) for a in rng.uniform(0.03, 0.12, size=3))
    phases = tuple(float(p) for p in rng.uniform(0.0, 2 * np.pi, size=3))
    ca, cb = _sample_colors(rng)
    return _SpriteParams(
        shape=shape,
        aspect=float(rng.uniform(0.55, 1.0)),
        exponent=float(rng.uniform(1.2, 3.5)),
        blob_amp=amps,
        blob_phase=phases,
        texture=texture,
        frequency=float(rng.uniform(2.0, 4.5)),
        phase=float(rng.uniform(0.0, 2 * np.pi)),
        color_a=tuple(ca),
        color_b=tuple(cb),
    )


def _object_frame(size: int, center: tuple[float, float], radius: float,
                  rotation_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel (u, v) coordinates in the sprite frame, normalized by radius."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    dx = xs - center[0]
    dy = ys - center[1]
    t = np.deg2rad(rotation_deg)
    u = (np.cos(t) * dx + np.sin(t) * dy) / radius
    v = (-np.sin(t) * dx + np.cos(t) * dy) / radius
    return u, v


def _support(params: _SpriteParams, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    if params.shape == "superellipse":
        p = params.exponent
        return (np.abs(u) ** p + np.abs(v / params.aspect) ** p) <= 1.0
    if params.shape == "bar":
        # high-exponent superellipse reads as a rounded bar
        p = max(params.exponent, 4.0)
        return (np.abs(u) ** p + np.abs(v / (0.5 * params.aspect)) ** p) <= 1.0
    r = np.hypot(u, v / params.aspect)
    phi = np.arctan2(v / params.aspect, u)
    limit = np.ones_like(r)
    for k, (a, ph) in enumerate(zip(params.blob_amp, params.blob_phase), start=2):
        limit = limit + a * np.cos(k * phi + ph)
    return r <= limit


def _texture_field(params: _SpriteParams, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    f, ph = params.frequency, params.phase
    if params.texture == "stripes":
        sel = np.sin(np.pi * f * u + ph) > 0
    elif params.texture == "rings":
        sel = np.sin(np.pi * f * np.hypot(u, v) + ph) > 0
    else:
        sel = (np.sin(np.pi * f * u + ph) * np.sin(np.pi * f * v + ph)) > 0
    ca = np.asarray(params.color_a)
    cb = np.asarray(params.color_b)
    return np.where(sel[:, :, None], ca, cb)


def _render_sprite(size: int, params: _SpriteParams, center: tuple[float, float],
                   radius: float, rotation_deg: float,
                   lightness: float) -> tuple[np.ndarray, np.ndarray]:
    """Sprite on a black field plus its exact binary mask."""
    u, v = _object_frame(size, center, radius, rotation_deg)
    sup = _support(params, u, v)
    tex = _texture_field(params, u, v) * lightness
    image = np.where(sup[:, :, None], tex, 0.0)
    return (
        np.clip(image, 0.0, 1.0).astype(np.float32),
        sup.astype(np.float32),
    )


def _background_field(size: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth plaid-plus-gradient backdrop, per-channel coefficients."""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / max(size - 1, 1)
    base = rng.uniform(0.25, 0.65, size=3)
    gain = rng.uniform(0.05, 0.15, size=(2, 3))
    freq = rng.uniform(1.5, 4.0, size=(2, 3))
    phase = rng.uniform(0.0, 2 * np.pi, size=(2, 3))
    grad = rng.uniform(-0.15, 0.15, size=3)
    field = np.empty((size, size, 3), dtype=np.float64)
    for c in range(3):
        field[:, :, c] = (
            base[c]
            + grad[c] * (ys - 0.5)
            + gain[0, c] * np.sin(2 * np.pi * freq[0, c] * xs + phase[0, c])
            + gain[1, c] * np.sin(2 * np.pi * freq[1, c] * ys + phase[1, c])
        )
    return np.clip(field, 0.0, 1.0).astype(np.float32)


def generate_synthetic_dataset(config: SyntheticConfig, out_dir) -> list[ManifestRecord]:
    """Render the dataset under out_dir and return the written manifest records.

    Layout: images/*.png, masks/*.png, manifest.jsonl (paths relative to out_dir).
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    size = config.image_size
    records: list[ManifestRecord] = []

    for oid in range(config.num_objects):
        rng = rng_for("synthetic-object", config.seed, oid)
        params = _sample_sprite(rng)
        radius = size * float(rng.uniform(0.22, 0.3))
        for vid in range(config.views_per_object):
            vrng = rng_for("synthetic-view", config.seed, oid, vid)
            rotation = 360.0 * vid / config.views_per_object + float(vrng.uniform(-10, 10))
            lightness = float(vrng.uniform(0.6, 1.0))
            jitter = vrng.uniform(-0.03 * size, 0.03 * size, size=2)
            center = (size / 2 + float(jitter[0]), size / 2 + float(jitter[1]))
            image, mask = _render_sprite(size, params, center, radius, rotation, lightness)
            stem = f"mv_{oid:03d}_{vid:03d}.png"
            save_image(out / "images" / stem, image)
            save_mask(out / "masks" / stem, mask)
            records.append(ManifestRecord("multiview", oid, vid,
                                          f"images/{stem}", f"masks/{stem}"))

    for sid in range(config.num_scenes):
        rng = rng_for("synthetic-scene", config.seed, sid)
        params = _sample_sprite(rng)
        radius = size * float(rng.uniform(0.16, 0.22))
        backdrop = _background_field(size, rng)
        margin = 1.35 * radius
        lo, hi = margin, size - 1 - margin
        start = rng.uniform(lo, hi, size=2)
        stop = rng.uniform(lo, hi, size=2)
        rot0 = float(rng.uniform(0, 360))
        rot1 = rot0 + float(rng.uniform(-90, 90))
        gain0 = rng.uniform(0.85, 1.1, size=3)
        gain1 = rng.uniform(0.85, 1.1, size=3)
        denom = max(config.frames_per_scene - 1, 1)
        for fid in range(config.frames_per_scene):
            a = fid / denom
            center = tuple((1 - a) * start + a * stop)
            rotation = (1 - a) * rot0 + a * rot1
            gain = (1 - a) * gain0 + a * gain1
            sprite, mask = _render_sprite(size, params, center, radius, rotation, 1.0)
            frame = np.where(mask[:, :, None] > 0.5, sprite, backdrop)
            frame = np.clip(frame * gain[None, None, :], 0.0, 1.0).astype(np.float32)
            stem = f"sc_{sid:03d}_{fid:03d}.png"
            save_image(out / "images" / stem, frame)
            save_mask(out / "masks" / stem, mask)
            records.append(ManifestRecord("scene", sid, fid,
                                          f"images/{stem}", f"masks/{stem}"))

    write_manifest(out / MANIFEST_NAME, records)
    return records
