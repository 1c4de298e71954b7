"""Background removal by mask multiplication."""

import numpy as np

from ..buffers import ensure_image, ensure_mask


def segment_object(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero out everything outside the mask: out[p] = image[p] * mask[p].

    Idempotent for binary masks. Raises DimensionError on size mismatch.
    """
    img = ensure_image(image)
    m = ensure_mask(mask, like=img)
    return img * m[:, :, None]
