import numpy as np
import pytest

from idcompose.data import segment_object
from idcompose.errors import DimensionError

from .conftest import random_image


def test_identity_mask_returns_image(rng):
    img = random_image(rng)
    out = segment_object(img, np.ones(img.shape[:2], dtype=np.float32))
    np.testing.assert_array_equal(out, img)


def test_null_mask_returns_zeros(rng):
    img = random_image(rng)
    out = segment_object(img, np.zeros(img.shape[:2], dtype=np.float32))
    assert not out.any()


def test_matches_elementwise_oracle(rng):
    img = random_image(rng, 8, 8)
    mask = np.zeros((8, 8), dtype=np.float32)
    mask[:, :4] = 1.0
    out = segment_object(img, mask)
    for r in range(8):
        for c in range(8):
            for ch in range(3):
                assert out[r, c, ch] == img[r, c, ch] * mask[r, c]


def test_idempotent_for_binary_masks(rng):
    img = random_image(rng)
    mask = (rng.random(img.shape[:2]) > 0.5).astype(np.float32)
    once = segment_object(img, mask)
    twice = segment_object(once, mask)
    np.testing.assert_array_equal(once, twice)


def test_soft_mask_scales_pixels(rng):
    img = random_image(rng)
    mask = np.full(img.shape[:2], 0.25, dtype=np.float32)
    out = segment_object(img, mask)
    np.testing.assert_allclose(out, img * 0.25, atol=1e-7)


def test_size_mismatch_rejected(rng):
    img = random_image(rng, 16, 16)
    with pytest.raises(DimensionError):
        segment_object(img, np.ones((16, 17), dtype=np.float32))
