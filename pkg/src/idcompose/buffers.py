"""Pixel buffers and their validation.

Images are float32 arrays of shape (H, W, 3) with values in [0, 1]; masks are
float32 arrays of shape (H, W) in [0, 1]. The helpers here enforce those
invariants at module boundaries and provide PNG round-trips and the
[0,1] <-> [-1,1] mapping used inside the diffusion core.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import DimensionError, RangeError

MIN_SIDE = 8


def ensure_image(arr: np.ndarray, *, name: str = "image") -> np.ndarray:
    """Validate an (H, W, 3) float image in [0, 1] and return it as float32."""
    a = np.asarray(arr)
    if a.ndim != 3 or a.shape[2] != 3:
        raise DimensionError(f"{name}: expected (H, W, 3), got {a.shape}")
    if a.shape[0] < MIN_SIDE or a.shape[1] < MIN_SIDE:
        raise DimensionError(f"{name}: sides must be >= {MIN_SIDE}, got {a.shape[:2]}")
    a = a.astype(np.float32, copy=False)
    if not np.isfinite(a).all():
        raise RangeError(f"{name}: non-finite values")
    if a.min() < 0.0 or a.max() > 1.0:
        raise RangeError(f"{name}: values outside [0, 1] (min={a.min():.4g}, max={a.max():.4g})")
    return a


def ensure_mask(arr: np.ndarray, *, like: np.ndarray | None = None, name: str = "mask") -> np.ndarray:
    """Validate an (H, W) float mask in [0, 1], optionally against a paired image."""
    m = np.asarray(arr)
    if m.ndim != 2:
        raise DimensionError(f"{name}: expected (H, W), got {m.shape}")
    m = m.astype(np.float32, copy=False)
    if not np.isfinite(m).all():
        raise RangeError(f"{name}: non-finite values")
    if m.min() < 0.0 or m.max() > 1.0:
        raise RangeError(f"{name}: values outside [0, 1]")
    if like is not None and m.shape != like.shape[:2]:
        raise DimensionError(f"{name}: shape {m.shape} does not match image {like.shape[:2]}")
    return m


def mask_support(mask: np.ndarray) -> np.ndarray:
    """Boolean support of a mask, thresholded at 0.5."""
    return np.asarray(mask) > 0.5


def mask_bbox(mask: np.ndarray) -> tuple[int, int, int, int] | None:
    """Tight (row0, col0, row1, col1) bbox of the >0.5 support, end-exclusive.

    Returns None for an empty mask.
    """
    sup = mask_support(mask)
    rows = np.flatnonzero(sup.any(axis=1))
    cols = np.flatnonzero(sup.any(axis=0))
    if rows.size == 0:
        return None
    return int(rows[0]), int(cols[0]), int(rows[-1]) + 1, int(cols[-1]) + 1


def to_signed(img01: np.ndarray) -> np.ndarray:
    """Map [0, 1] pixels to the [-1, 1] range the diffusion core works in."""
    return img01.astype(np.float32) * 2.0 - 1.0


def to_unit(img_signed: np.ndarray) -> np.ndarray:
    """Map [-1, 1] diffusion-space values back to [0, 1], clipping overshoot."""
    return np.clip((img_signed + 1.0) / 2.0, 0.0, 1.0).astype(np.float32)


def quantize(img01: np.ndarray) -> np.ndarray:
    """[0, 1] float image to uint8 with round-half-away, the PNG convention."""
    return np.clip(np.rint(np.asarray(img01) * 255.0), 0, 255).astype(np.uint8)


def load_image(path) -> np.ndarray:
    """Read an RGB PNG (or any PIL-readable file) to a validated [0,1] image."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return ensure_image(arr, name=str(path))


def save_image(path, img01: np.ndarray) -> None:
    Image.fromarray(quantize(ensure_image(img01))).save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    """Read a single-channel PNG to a validated [0,1] mask."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float32) / 255.0
    return ensure_mask(arr, name=str(path))


def save_mask(path, mask: np.ndarray) -> None:
    m = ensure_mask(mask)
    Image.fromarray(np.clip(np.rint(m * 255.0), 0, 255).astype(np.uint8), mode="L").save(path, format="PNG")
