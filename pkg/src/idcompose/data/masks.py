"""Mask coarsening at four precision levels.

Level 1 dilates the input by a radius of 2% of its bbox diagonal, level 2
takes the convex hull of that, level 3 circumscribes the hull with a randomized
5-8 sided polygon, and level 4 is the tight bounding box of the input support.
Every level contains the thresholded input; polygon levels are rasterized by
half-plane tests against pixel centers so containment is exact, not
approximate.
"""

from __future__ import annotations

import cv2
import numpy as np

from ..buffers import ensure_mask, mask_bbox, mask_support
from ..errors import ConfigurationError, EmptyMaskError
from ..seeding import rng_for

DILATION_FRACTION = 0.02  # of the bbox diagonal
POLYGON_SIDES = (5, 8)  # inclusive range for level 3
_EDGE_EPS = 1e-6  # keeps pixel centers sitting exactly on an edge inside


def validate_mask_level(level: int) -> int:
    if level not in (1, 2, 3, 4):
        raise ConfigurationError(f"mask level must be in 1..4, got {level}")
    return int(level)


def _dilate(support: np.ndarray, radius: int) -> np.ndarray:
    if radius < 1:
        return support.copy()
    k = 2 * radius + 1
    kernel = cv2.getStructuringElement(cv2.MORPH_ELLIPSE, (k, k))
    return cv2.dilate(support.astype(np.uint8), kernel).astype(bool)


def _halfplane_fill(shape: tuple[int, int], normals: np.ndarray, supports: np.ndarray) -> np.ndarray:
    """Pixels whose centers satisfy dot(p, n_i) <= s_i for every half-plane."""
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w]
    pts = np.stack([xs, ys], axis=-1).astype(np.float64)
    proj = pts @ normals.T  # (H, W, K)
    return np.all(proj <= supports[None, None, :] + _EDGE_EPS, axis=-1)


def _convex_hull_fill(support: np.ndarray) -> np.ndarray:
    pts = cv2.findNonZero(support.astype(np.uint8))  # (N, 1, 2) as (x, y)
    hull = cv2.convexHull(pts).reshape(-1, 2).astype(np.float64)
    if len(hull) < 3:
        # degenerate: collinear support, keep it as-is
        return support.copy()
    centroid = hull.mean(axis=0)
    normals = []
    for i in range(len(hull)):
        a, b = hull[i], hull[(i + 1) % len(hull)]
        e = b - a
        n = np.array([e[1], -e[0]])
        norm = np.hypot(*n)
        if norm == 0:
            continue
        n /= norm
        if np.dot(n, centroid - a) > 0:  # orient outward
            n = -n
        normals.append(n)
    normals = np.asarray(normals)
    supports = (hull @ normals.T).max(axis=0)
    return _halfplane_fill(support.shape, normals, supports)


def _circumscribed_polygon_fill(support: np.ndarray, sides: int, angle0: float) -> np.ndarray:
    """Smallest polygon with the given edge directions that contains the support."""
    pts = np.argwhere(support)[:, ::-1].astype(np.float64)  # (x, y)
    angles = angle0 + np.arange(sides) * (2.0 * np.pi / sides)
    normals = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    supports = (pts @ normals.T).max(axis=0)
    return _halfplane_fill(support.shape, normals, supports)


def coarsen_mask(mask: np.ndarray, level: int, rng_seed: int = 0) -> np.ndarray:
    """Coarsen a mask to one of four precision levels (4 = bounding box).

    The output is binary, contains the thresholded input, and is deterministic
    given rng_seed (only level 3 consumes randomness).
    """
    m = ensure_mask(mask)
    level = validate_mask_level(level)
    bbox = mask_bbox(m)
    if bbox is None:
        raise EmptyMaskError("cannot coarsen an empty mask")
    support = mask_support(m)

    if level == 4:
        out = np.zeros_like(support)
        r0, c0, r1, c1 = bbox
        out[r0:r1, c0:c1] = True
        return out.astype(np.float32)

    r0, c0, r1, c1 = bbox
    diag = float(np.hypot(r1 - r0, c1 - c0))
    radius = max(1, int(round(DILATION_FRACTION * diag)))
    dilated = _dilate(support, radius)
    if level == 1:
        return dilated.astype(np.float32)

    hull = _convex_hull_fill(dilated)
    if level == 2:
        return hull.astype(np.float32)

    rng = rng_for("coarsen", rng_seed)
    sides = int(rng.integers(POLYGON_SIDES[0], POLYGON_SIDES[1] + 1))
    angle0 = float(rng.uniform(0.0, 2.0 * np.pi))
    poly = _circumscribed_polygon_fill(hull, sides, angle0)
    return poly.astype(np.float32)
