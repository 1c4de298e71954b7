"""Insert a cropped object into a mask region of a background.

Used by the concat/controlnet conditioning variants, which need the reference
object spatially aligned with the generation area.
"""

from __future__ import annotations

import cv2
import numpy as np

from ..buffers import ensure_image, ensure_mask, mask_bbox
from ..errors import EmptyMaskError


def _resize(img: np.ndarray, hw: tuple[int, int], nearest: bool) -> np.ndarray:
    h, w = hw
    if img.shape[:2] == (h, w):
        return img.copy()
    interp = cv2.INTER_NEAREST if nearest else cv2.INTER_LINEAR
    return cv2.resize(img, (w, h), interpolation=interp)


def fit_object_in_mask(
    object_image: np.ndarray,
    object_mask: np.ndarray,
    background: np.ndarray,
    mask: np.ndarray,
) -> np.ndarray:
    """Crop the object to its bbox, letterbox-resize it into the mask bbox,
    and alpha-paste it over the background. Pixels outside the mask bbox are
    the background, untouched.
    """
    obj = ensure_image(object_image)
    obj_m = ensure_mask(object_mask, like=obj)
    bg = ensure_image(background)
    m = ensure_mask(mask, like=bg)

    obj_box = mask_bbox(obj_m)
    if obj_box is None:
        raise EmptyMaskError("object mask is empty")
    tgt_box = mask_bbox(m)
    if tgt_box is None:
        raise EmptyMaskError("placement mask is empty")

    r0, c0, r1, c1 = obj_box
    crop = obj[r0:r1, c0:c1]
    crop_m = obj_m[r0:r1, c0:c1]
    oh, ow = crop.shape[:2]

    tr0, tc0, tr1, tc1 = tgt_box
    th, tw = tr1 - tr0, tc1 - tc0
    scale = min(th / oh, tw / ow)
    nh = max(1, int(round(oh * scale)))
    nw = max(1, int(round(ow * scale)))
    fit = np.clip(_resize(crop, (nh, nw), nearest=False), 0.0, 1.0)
    fit_m = (_resize(crop_m, (nh, nw), nearest=True) > 0.5).astype(np.float32)

    out = bg.copy()
    off_r = tr0 + (th - nh) // 2
    off_c = tc0 + (tw - nw) // 2
    region = out[off_r:off_r + nh, off_c:off_c + nw]
    alpha = fit_m[:, :, None]
    out[off_r:off_r + nh, off_c:off_c + nw] = alpha * fit + (1.0 - alpha) * region
    return out
