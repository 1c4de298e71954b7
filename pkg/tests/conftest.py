import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def random_image(rng, h=16, w=16):
    return rng.random((h, w, 3)).astype(np.float32)


def random_blob_mask(rng, size=64, radius_frac=(0.25, 0.4)):
    """Star-convex blob: radius modulated by a low-order fourier series."""
    r0 = size * rng.uniform(*radius_frac)
    amps = rng.uniform(0.05, 0.2, size=3)
    phases = rng.uniform(0, 2 * np.pi, size=3)
    cy, cx = size / 2 + rng.uniform(-2, 2), size / 2 + rng.uniform(-2, 2)
    ys, xs = np.mgrid[0:size, 0:size]
    dy, dx = ys - cy, xs - cx
    r = np.hypot(dx, dy)
    phi = np.arctan2(dy, dx)
    limit = np.ones_like(r)
    for k, (a, p) in enumerate(zip(amps, phases), start=2):
        limit = limit + a * np.cos(k * phi + p)
    return (r <= r0 * limit).astype(np.float32)
