"""Linear noise schedule and the forward noising process.

Cumulative products are computed and stored at float64; tensor callers get
coefficients cast to their own dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..errors import ConfigurationError, DimensionError

BETA_START = 1e-4
BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    T: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def alpha_bar(self, t) -> np.ndarray:
        """alpha_bar at timestep t, where t = -1 denotes the clean endpoint."""
        t = np.asarray(t)
        if np.any(t < -1) or np.any(t >= self.T):
            raise IndexError(f"timestep out of range [-1, {self.T}): {t}")
        padded = np.concatenate([[1.0], self.alpha_bars])
        return padded[t + 1]


def make_schedule(T: int, beta_start: float = BETA_START, beta_end: float = BETA_END) -> NoiseSchedule:
    if T < 2:
        raise ConfigurationError(f"schedule needs T >= 2, got {T}")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(T=T, betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas))


def _coeffs(schedule: NoiseSchedule, t, ref: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """(sqrt(alpha_bar), sqrt(1 - alpha_bar)) broadcast against ref."""
    ab = np.asarray(schedule.alpha_bar(t), dtype=np.float64)
    shape = (-1,) + (1,) * (ref.ndim - 1) if ab.ndim else ()
    ab_t = torch.as_tensor(ab, dtype=ref.dtype, device=ref.device).reshape(shape)
    return torch.sqrt(ab_t), torch.sqrt(1.0 - ab_t)


def q_sample(x0: torch.Tensor, t, eps: torch.Tensor, schedule: NoiseSchedule) -> torch.Tensor:
    """x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps.

    t is a scalar int or a per-example vector matching x0's batch dimension.
    """
    if eps.shape != x0.shape:
        raise DimensionError(f"eps shape {tuple(eps.shape)} != x0 shape {tuple(x0.shape)}")
    sq_ab, sq_one_minus = _coeffs(schedule, t, x0)
    return sq_ab * x0 + sq_one_minus * eps
