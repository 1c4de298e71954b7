"""Temporal pair sampling for pseudo-video sources."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InsufficientFramesError
from ..seeding import rng_for

DEFAULT_WINDOW = 7  # widening the window trades quality for view variation


@dataclass(frozen=True)
class VideoPairSpec:
    frame_count: int
    window: int = DEFAULT_WINDOW
    rng_seed: int = 0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


def sample_frame_pair(spec: VideoPairSpec) -> tuple[int, int]:
    """Uniformly pick an ordered frame pair (a, b), a != b, |a - b| <= window.

    Deterministic in spec.rng_seed; vary the seed to draw again.
    """
    n, w = spec.frame_count, spec.window
    if n < 2:
        raise InsufficientFramesError(f"need >= 2 frames, got {n}")
    pairs = [(a, b) for a in range(n) for b in range(max(0, a - w), min(n, a + w + 1)) if a != b]
    rng = rng_for("frame-pair", spec.rng_seed, n, w)
    return pairs[int(rng.integers(len(pairs)))]
