"""Classifier-free guidance combination."""

from __future__ import annotations

from ..errors import DimensionError

DEFAULT_CFG_SCALE = 3.0


def cfg_combine(eps_cond, eps_uncond, scale: float):
    """eps_uncond + scale * (eps_cond - eps_uncond).

    scale=1 returns the conditional prediction; scale=0 the unconditional.
    Works on any array type supporting elementwise arithmetic.
    """
    if tuple(eps_cond.shape) != tuple(eps_uncond.shape):
        raise DimensionError(
            f"shape mismatch: {tuple(eps_cond.shape)} vs {tuple(eps_uncond.shape)}")
    return eps_uncond + scale * (eps_cond - eps_uncond)
