"""3D color lookup tables: the light/color perturbation half of augmentation.

A Lut3D maps RGB in [0,1]^3 through an N x N x N grid of RGB entries by
trilinear interpolation. Random smooth LUTs bake per-channel gain, offset and
gamma jitter into the grid, giving deterministic, file-serializable color
shifts without external LUT assets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..buffers import ensure_image
from ..errors import DimensionError, RangeError
from ..seeding import rng_for

# jitter ranges for random_smooth_lut
GAIN_RANGE = (0.8, 1.25)
OFFSET_RANGE = (-0.05, 0.05)
GAMMA_RANGE = (0.8, 1.25)
DEFAULT_GRID = 17


@dataclass(frozen=True, eq=False)
class Lut3D:
    """table[r, g, b] -> RGB triple; all entries in [0, 1], size >= 2."""

    size: int
    table: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, Lut3D)
            and self.size == other.size
            and np.array_equal(self.table, other.table)
        )

    def __post_init__(self):
        if self.size < 2:
            raise DimensionError(f"LUT grid size must be >= 2, got {self.size}")
        t = np.asarray(self.table, dtype=np.float32)
        if t.shape != (self.size, self.size, self.size, 3):
            raise DimensionError(f"LUT table shape {t.shape} != {(self.size,) * 3 + (3,)}")
        if not np.isfinite(t).all() or t.min() < 0.0 or t.max() > 1.0:
            raise RangeError("LUT entries must be finite and in [0, 1]")
        object.__setattr__(self, "table", t)


def identity_lut(size: int = DEFAULT_GRID) -> Lut3D:
    ax = np.linspace(0.0, 1.0, size, dtype=np.float32)
    r, g, b = np.meshgrid(ax, ax, ax, indexing="ij")
    return Lut3D(size, np.stack([r, g, b], axis=-1))


def constant_lut(color, size: int = DEFAULT_GRID) -> Lut3D:
    c = np.asarray(color, dtype=np.float32).reshape(3)
    return Lut3D(size, np.broadcast_to(c, (size, size, size, 3)).copy())


def random_smooth_lut(seed: int, size: int = DEFAULT_GRID) -> Lut3D:
    """Identity LUT perturbed by per-channel gain/offset/gamma jitter."""
    rng = rng_for("lut", seed)
    gain = rng.uniform(*GAIN_RANGE, size=3)
    offset = rng.uniform(*OFFSET_RANGE, size=3)
    gamma = rng.uniform(*GAMMA_RANGE, size=3)
    ax = np.linspace(0.0, 1.0, size, dtype=np.float64)
    r, g, b = np.meshgrid(ax, ax, ax, indexing="ij")
    chans = []
    for i, v in enumerate((r, g, b)):
        chans.append(np.clip(np.power(v, gamma[i]) * gain[i] + offset[i], 0.0, 1.0))
    return Lut3D(size, np.stack(chans, axis=-1).astype(np.float32))


def apply_lut(image: np.ndarray, lut: Lut3D) -> np.ndarray:
    """Map each pixel through the LUT grid by trilinear interpolation."""
    img = ensure_image(image)
    n = lut.size
    coords = img.astype(np.float64) * (n - 1)
    lo = np.clip(np.floor(coords).astype(np.int64), 0, n - 2)
    frac = coords - lo
    hi = lo + 1

    r0, g0, b0 = lo[..., 0], lo[..., 1], lo[..., 2]
    r1, g1, b1 = hi[..., 0], hi[..., 1], hi[..., 2]
    fr, fg, fb = frac[..., 0:1], frac[..., 1:2], frac[..., 2:3]

    t = lut.table.astype(np.float64)
    c000 = t[r0, g0, b0]
    c001 = t[r0, g0, b1]
    c010 = t[r0, g1, b0]
    c011 = t[r0, g1, b1]
    c100 = t[r1, g0, b0]
    c101 = t[r1, g0, b1]
    c110 = t[r1, g1, b0]
    c111 = t[r1, g1, b1]

    c00 = c000 * (1 - fb) + c001 * fb
    c01 = c010 * (1 - fb) + c011 * fb
    c10 = c100 * (1 - fb) + c101 * fb
    c11 = c110 * (1 - fb) + c111 * fb
    c0 = c00 * (1 - fg) + c01 * fg
    c1 = c10 * (1 - fg) + c11 * fg
    out = c0 * (1 - fr) + c1 * fr
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def write_cube(path, lut: Lut3D) -> None:
    """Plain-text cube file: header line, then N^3 RGB rows, blue varying fastest."""
    n = lut.size
    with open(path, "w") as f:
        f.write(f"LUT_3D_SIZE {n}\n")
        for r in range(n):
            for g in range(n):
                for b in range(n):
                    e = lut.table[r, g, b]
                    f.write(f"{e[0]:.6f} {e[1]:.6f} {e[2]:.6f}\n")


def read_cube(path) -> Lut3D:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or not lines[0].startswith("LUT_3D_SIZE"):
        raise DimensionError(f"{path}: missing LUT_3D_SIZE header")
    n = int(lines[0].split()[1])
    rows = lines[1:]
    if len(rows) != n**3:
        raise DimensionError(f"{path}: expected {n ** 3} entries, got {len(rows)}")
    table = np.empty((n, n, n, 3), dtype=np.float32)
    i = 0
    for r in range(n):
        for g in range(n):
            for b in range(n):
                table[r, g, b] = [float(x) for x in rows[i].split()]
                i += 1
    return Lut3D(n, table)
