"""Deterministic DDIM sampling with per-step background blending.

The unmasked region of the output is the input background, exactly: after
every DDIM update the background area is overwritten with the forward-noised
clean background at the destination timestep, and with the clean background
itself at the final step.
"""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
import torch

from ..buffers import ensure_image, ensure_mask, mask_support, to_signed, to_unit
from ..data.fitting import fit_object_in_mask
from ..errors import ConfigurationError, DimensionError
from ..seeding import rng_for
from .guidance import DEFAULT_CFG_SCALE, cfg_combine
from .schedule import NoiseSchedule, q_sample
from .unet import assemble_denoiser_input

DEFAULT_STEPS = 50
X0_CLAMP = (-1.0, 2.0)  # safety range for the reconstructed clean image


@dataclass(frozen=True)
class SampleRequest:
    background: np.ndarray
    mask: np.ndarray
    object_image: np.ndarray
    steps: int = DEFAULT_STEPS
    cfg_scale: float = DEFAULT_CFG_SCALE
    seed: int = 0
    object_mask: np.ndarray | None = None  # support of object_image when it has dark zeros

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigurationError(f"steps must be >= 1, got {self.steps}")
        if self.cfg_scale < 0:
            raise ConfigurationError(f"cfg_scale must be >= 0, got {self.cfg_scale}")


def ddim_step(x_t: torch.Tensor, eps_hat: torch.Tensor, t: int, t_prev: int,
              schedule: NoiseSchedule, clamp: tuple[float, float] | None = X0_CLAMP) -> torch.Tensor:
    """One deterministic (eta=0) update from timestep t to t_prev.

    t_prev = -1 denotes the clean endpoint (alpha_bar = 1). The reconstructed
    x0 is clamped to the safety range unless clamp is None.
    """
    if t_prev >= t:
        raise ConfigurationError(f"t_prev must be < t, got t={t}, t_prev={t_prev}")
    if eps_hat.shape != x_t.shape:
        raise DimensionError(f"eps shape {tuple(eps_hat.shape)} != x shape {tuple(x_t.shape)}")
    ab_t = float(schedule.alpha_bar(t))
    ab_prev = float(schedule.alpha_bar(t_prev))
    x0_hat = (x_t - np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(ab_t)
    if clamp is not None:
        x0_hat = x0_hat.clamp(*clamp)
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps_hat


def blend_background(x: torch.Tensor, background: torch.Tensor, mask: torch.Tensor,
                     t: int, eps_bg: torch.Tensor | None, schedule: NoiseSchedule) -> torch.Tensor:
    """mask * x + (1 - mask) * (background noised to timestep t).

    background is in [-1, 1]; t = -1 uses the clean background (no noise).
    mask is (B, 1, H, W) so it broadcasts over channels.
    """
    if background.shape != x.shape:
        raise DimensionError(
            f"background shape {tuple(background.shape)} != x shape {tuple(x.shape)}")
    if mask.shape[-2:] != x.shape[-2:] or mask.shape[1] != 1:
        raise DimensionError(f"mask must be (B, 1, H, W) matching x, got {tuple(mask.shape)}")
    if t == -1:
        noised = background
    else:
        if eps_bg is None:
            raise ConfigurationError("eps_bg required for a noisy blend step")
        noised = q_sample(background, t, eps_bg, schedule)
    return mask * x + (1.0 - mask) * noised


def ddim_timesteps(T: int, steps: int) -> list[int]:
    """Descending timestep grid ending at -1 (the clean endpoint)."""
    grid = np.unique(np.round(np.linspace(0, T - 1, min(steps, T))).astype(int))
    return list(grid[::-1])


def _pad_to_divisor(arr: np.ndarray, divisor: int, mode: str) -> tuple[np.ndarray, tuple[int, int]]:
    h, w = arr.shape[:2]
    ph = (-h) % divisor
    pw = (-w) % divisor
    if ph == 0 and pw == 0:
        return arr, (0, 0)
    pad = ((0, ph), (0, pw)) + ((0, 0),) * (arr.ndim - 2)
    return np.pad(arr, pad, mode=mode), (ph, pw)


def _resize_for_encoder(image: np.ndarray, size: int) -> np.ndarray:
    if image.shape[:2] == (size, size):
        return image
    return np.clip(cv2.resize(image, (size, size), interpolation=cv2.INTER_LINEAR), 0.0, 1.0)


def sample_composite(request: SampleRequest, model, encoder) -> np.ndarray:
    """Generate a composite for the request; deterministic in request.seed.

    The background drives the unmasked region bit-for-bit (up to float
    rounding <= 1e-6). An all-zero mask short-circuits to the background.
    Backgrounds of any size >= 8 are handled by replicate-padding to the
    UNet's size divisor and cropping back.
    """
    bg01 = ensure_image(request.background, name="background")
    mask = ensure_mask(request.mask, like=bg01)
    obj01 = ensure_image(request.object_image, name="object_image")
    if not mask_support(mask).any():
        return bg01.copy()

    config = model.config
    needs_fit = config.variant in ("concat", "controlnet")
    fit01 = None
    if needs_fit:
        obj_m = request.object_mask
        if obj_m is None:
            obj_m = (obj01.sum(axis=2) > 0).astype(np.float32)
        fit01 = fit_object_in_mask(obj01, obj_m, bg01, mask)

    # pad to the UNet's spatial divisor; padded area is masked 0 (background)
    divisor = config.size_divisor
    bg_p, _ = _pad_to_divisor(bg01, divisor, "edge")
    mask_p, _ = _pad_to_divisor(mask, divisor, "constant")
    h, w = bg_p.shape[:2]

    dtype = next(model.parameters()).dtype
    device = next(model.parameters()).device

    def as_chw(img):
        return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))[None].to(dtype=dtype, device=device)

    bg_t = as_chw(bg_p)  # [0,1]; assembly maps to signed
    bg_signed = bg_t * 2.0 - 1.0
    mask_t = torch.from_numpy(mask_p)[None, None].to(dtype=dtype, device=device)
    fit_t = None
    if fit01 is not None:
        fit_p, _ = _pad_to_divisor(fit01, divisor, "edge")
        fit_t = as_chw(fit_p)

    schedule = getattr(model, "schedule", None)
    if schedule is None:
        raise ConfigurationError("model must carry a noise schedule for sampling")

    enc_size = encoder.config.image_size
    obj_in = _resize_for_encoder(obj01, enc_size)
    with torch.no_grad():
        cond = encoder(as_chw(obj_in))
        null = encoder.null_conditioning(1)

        times = ddim_timesteps(schedule.T, request.steps)
        rng = rng_for("sample", request.seed)
        x = torch.from_numpy(
            rng.standard_normal((1, 3, h, w))).to(dtype=dtype, device=device)
        # the initial state is already blended so early steps see a coherent background
        eps0 = torch.from_numpy(
            rng_for("sample-bg", request.seed, int(times[0])).standard_normal((1, 3, h, w))
        ).to(dtype=dtype, device=device)
        x = blend_background(x, bg_signed, mask_t, int(times[0]), eps0, schedule)

        for i, t in enumerate(times):
            t_prev = int(times[i + 1]) if i + 1 < len(times) else -1
            x_in = assemble_denoiser_input(x, bg_t, mask_t, config.variant, fit_t)
            eps_c = model(x_in, int(t), cond)
            eps_u = model(x_in, int(t), null)
            eps = cfg_combine(eps_c, eps_u, request.cfg_scale)
            x = ddim_step(x, eps, int(t), t_prev, schedule)
            eps_bg = None
            if t_prev != -1:
                eps_bg = torch.from_numpy(
                    rng_for("sample-bg", request.seed, t_prev).standard_normal((1, 3, h, w))
                ).to(dtype=dtype, device=device)
            x = blend_background(x, bg_signed, mask_t, t_prev, eps_bg, schedule)

    out = to_unit(x[0].cpu().numpy().transpose(1, 2, 0))
    return out[: bg01.shape[0], : bg01.shape[1]]
