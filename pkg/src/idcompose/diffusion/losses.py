"""Denoising losses for both training stages.

Stage 1 denoises one segmented view of an object conditioned on another view
of the same object; the assembled input uses a black background and an
all-ones mask so the whole frame is generated. Stage 2 denoises the real
scene conditioned on the extracted object, and the squared error is weighted
per pixel by the coarse placement mask before averaging.

Draw order from the supplied rng is part of the contract (tests replay it):
first the per-example timesteps, then the noise tensor, then any conditioning
dropout decisions inside the encoder.
"""

from __future__ import annotations

import numpy as np
import torch

from ..buffers import to_signed
from ..data.examples import CompositeExample, ViewPairExample
from ..data.fitting import fit_object_in_mask
from ..errors import ConfigurationError
from .sampler import _resize_for_encoder
from .schedule import NoiseSchedule, q_sample
from .unet import assemble_denoiser_input


def _stack_chw(images, dtype, device) -> torch.Tensor:
    arr = np.stack([np.ascontiguousarray(img.transpose(2, 0, 1)) for img in images])
    return torch.from_numpy(arr).to(dtype=dtype, device=device)


def _encoder_batch(images, encoder, dtype, device) -> torch.Tensor:
    size = encoder.config.image_size
    return _stack_chw([_resize_for_encoder(img, size) for img in images], dtype, device)


def _draw(rng: np.random.Generator, schedule: NoiseSchedule, shape, dtype, device):
    t = rng.integers(schedule.T, size=shape[0])
    eps = torch.from_numpy(rng.standard_normal(shape)).to(dtype=dtype, device=device)
    return t, eps


def loss_id(batch: list[ViewPairExample], model, encoder, schedule: NoiseSchedule,
            rng: np.random.Generator, drop_prob: float = 0.0) -> torch.Tensor:
    """Identity-pretraining loss: predict the noise added to the target view.

    Per example: t ~ U{0..T-1}, eps ~ N(0,1); the model sees
    q_sample(signed target, t, eps) conditioned on the source view's tokens,
    and the loss is the mean squared eps error over batch and elements.
    """
    if not batch:
        raise ConfigurationError("loss_id needs a nonempty batch")
    dtype = next(model.parameters()).dtype
    device = next(model.parameters()).device

    targets = _stack_chw([to_signed(ex.target_view) for ex in batch], dtype, device)
    b, _, h, w = targets.shape
    t, eps = _draw(rng, schedule, (b, 3, h, w), dtype, device)
    x_t = q_sample(targets, t, eps, schedule)

    cond = encoder.condition_batch(
        _encoder_batch([ex.source_view for ex in batch], encoder, dtype, device),
        drop_prob, rng)

    # whole frame is the generation region: black background, mask of ones
    bg = torch.zeros_like(x_t)
    mask = torch.ones((b, 1, h, w), dtype=dtype, device=device)
    variant = model.config.variant
    fit = None
    if variant != "cross_attention":
        # the source view doubles as the spatial hint; zero-init extra paths
        # make this a no-op until stage 2 trains them
        fit = _stack_chw([ex.source_view for ex in batch], dtype, device)
    x_in = assemble_denoiser_input(x_t, bg, mask, variant, fit)

    eps_hat = model(x_in, torch.as_tensor(t, device=device), cond)
    return torch.mean((eps - eps_hat) ** 2)


def loss_comp(batch: list[CompositeExample], model, encoder, schedule: NoiseSchedule,
              rng: np.random.Generator, drop_prob: float = 0.0) -> torch.Tensor:
    """Compositing loss: mask-weighted eps prediction error on real scenes.

    The target latent is the signed scene image; conditioning comes from the
    segmented object. The squared error is multiplied per pixel by the coarse
    mask and then averaged over every element, so unmasked pixels contribute
    zeros to the mean rather than being excluded from it.
    """
    if not batch:
        raise ConfigurationError("loss_comp needs a nonempty batch")
    dtype = next(model.parameters()).dtype
    device = next(model.parameters()).device

    targets = _stack_chw([to_signed(ex.target) for ex in batch], dtype, device)
    b, _, h, w = targets.shape
    t, eps = _draw(rng, schedule, (b, 3, h, w), dtype, device)
    x_t = q_sample(targets, t, eps, schedule)

    cond = encoder.condition_batch(
        _encoder_batch([ex.object_image for ex in batch], encoder, dtype, device),
        drop_prob, rng)

    bg = _stack_chw([ex.background for ex in batch], dtype, device)  # [0,1]
    mask = torch.from_numpy(np.stack([ex.mask[None] for ex in batch])).to(
        dtype=dtype, device=device)
    variant = model.config.variant
    fit = None
    if variant != "cross_attention":
        fit = _stack_chw(
            [fit_object_in_mask(ex.object_image,
                                (ex.object_image.sum(axis=2) > 0).astype(np.float32),
                                ex.background, ex.mask)
             for ex in batch], dtype, device)
    x_in = assemble_denoiser_input(x_t, bg, mask, variant, fit)

    eps_hat = model(x_in, torch.as_tensor(t, device=device), cond)
    return torch.mean(mask * (eps - eps_hat) ** 2)
