"""Object-centered square cropping for the measurement protocol."""

from __future__ import annotations

import math

import cv2
import numpy as np

from ..buffers import ensure_image, ensure_mask, mask_support
from ..errors import EmptyMaskError

CROP_MARGIN = 1.2


def crop_to_object(image: np.ndarray, mask: np.ndarray, out_size: int) -> np.ndarray:
    """Square crop around the mask bbox, resized to out_size.

    The side is CROP_MARGIN times the longer bbox side, clamped so the square
    stays inside the frame; the window centers on the bbox and slides inward
    at the borders instead of shrinking.
    """
    image = ensure_image(image, name="image")
    mask = ensure_mask(mask, like=image)
    support = mask_support(mask)
    ys, xs = np.nonzero(support)
    if ys.size == 0:
        raise EmptyMaskError("cannot crop to an empty mask")
    h, w = mask.shape
    y0, y1 = int(ys.min()), int(ys.max())
    x0, x1 = int(xs.min()), int(xs.max())
    longest = max(y1 - y0 + 1, x1 - x0 + 1)
    side = min(int(math.ceil(CROP_MARGIN * longest)), h, w)

    def start(center: float, limit: int) -> int:
        return int(np.clip(round(center - side / 2.0), 0, limit - side))

    ty = start((y0 + y1 + 1) / 2.0, h)
    tx = start((x0 + x1 + 1) / 2.0, w)
    crop = image[ty:ty + side, tx:tx + side]
    if side == out_size:
        return crop.copy()
    resized = cv2.resize(crop, (out_size, out_size), interpolation=cv2.INTER_LINEAR)
    return np.clip(resized, 0.0, 1.0)
