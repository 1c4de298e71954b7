"""Object augmentation: affine geometry then LUT color perturbation.

The affine part applies one warp to image and mask with identical geometry
(bilinear for pixels, nearest for the mask, which is then re-binarized at 0.5
so no soft halo survives). The color part maps the image, and only the image,
through a 3D LUT. Positive rotation turns the content counterclockwise when
the image is displayed with row 0 at the top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import cv2
import numpy as np

from ..buffers import ensure_image, ensure_mask
from ..errors import ConfigurationError, DegenerateAugmentationError
from ..seeding import derive_seed, rng_for
from .lut import Lut3D, apply_lut, identity_lut, random_smooth_lut

ROTATION_LIMIT = 180.0  # hard validity bound, degrees
TRANSLATE_LIMIT = 0.25  # fraction of the image extent
SAMPLE_ROTATION = (-30.0, 30.0)  # distribution actually drawn for training
SAMPLE_SCALE = (0.8, 1.2)
SAMPLE_TRANSLATE = (-0.10, 0.10)
SAMPLE_FLIP_PROB = 0.5


@dataclass(frozen=True)
class AugmentParams:
    rotation: float = 0.0
    scale: float = 1.0
    translate: tuple[float, float] = (0.0, 0.0)  # (dx, dy) as fraction of extent
    horizontal_flip: bool = False
    lut: Lut3D = field(default_factory=identity_lut)
    rng_seed: int = 0

    def __post_init__(self):
        if not (-ROTATION_LIMIT <= self.rotation <= ROTATION_LIMIT):
            raise ConfigurationError(f"rotation must be within +-{ROTATION_LIMIT} degrees")
        if self.scale <= 0:
            raise ConfigurationError("scale must be > 0")
        if any(abs(t) > TRANSLATE_LIMIT for t in self.translate):
            raise ConfigurationError(f"|translate| must be <= {TRANSLATE_LIMIT}")


def sample_augment_params(rng_seed: int) -> AugmentParams:
    """Draw modest perturbation parameters, deterministic in the seed."""
    rng = rng_for("augment-params", rng_seed)
    return AugmentParams(
        rotation=float(rng.uniform(*SAMPLE_ROTATION)),
        scale=float(rng.uniform(*SAMPLE_SCALE)),
        translate=(float(rng.uniform(*SAMPLE_TRANSLATE)), float(rng.uniform(*SAMPLE_TRANSLATE))),
        horizontal_flip=bool(rng.random() < SAMPLE_FLIP_PROB),
        lut=random_smooth_lut(derive_seed("augment-lut", rng_seed)),
        rng_seed=rng_seed,
    )


def _forward_matrix(h: int, w: int, params: AugmentParams) -> np.ndarray:
    """2x3 forward affine matrix on (x, y) pixel coordinates."""
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = math.radians(params.rotation)
    s = params.scale
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    def mat3(a):
        m = np.eye(3)
        m[:2, :] = a
        return m

    flip = mat3([[-1.0 if params.horizontal_flip else 1.0, 0.0, 2 * cx if params.horizontal_flip else 0.0],
                 [0.0, 1.0, 0.0]])
    to_origin = mat3([[1, 0, -cx], [0, 1, -cy]])
    rot_scale = mat3([[s * cos_t, s * sin_t, 0], [-s * sin_t, s * cos_t, 0]])
    back = mat3([[1, 0, cx + params.translate[0] * w], [0, 1, cy + params.translate[1] * h]])
    m = back @ rot_scale @ to_origin @ flip
    return m[:2, :]


def augment_object(
    object_image: np.ndarray, mask: np.ndarray, params: AugmentParams
) -> tuple[np.ndarray, np.ndarray]:
    """Warp image+mask by the affine params, then LUT-perturb the image only.

    Raises DegenerateAugmentationError when the warp leaves no mask support in
    frame. Deterministic: params fully describe the output.
    """
    img = ensure_image(object_image)
    m = ensure_mask(mask, like=img)
    h, w = m.shape
    mat = _forward_matrix(h, w, params)

    warped_img = cv2.warpAffine(
        img, mat, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=0.0
    )
    warped_mask = cv2.warpAffine(
        m, mat, (w, h), flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_CONSTANT, borderValue=0.0
    )
    warped_mask = (warped_mask > 0.5).astype(np.float32)
    if not warped_mask.any():
        raise DegenerateAugmentationError("augmentation moved the object fully out of frame")

    out_img = apply_lut(np.clip(warped_img, 0.0, 1.0), params.lut)
    return out_img, warped_mask
