"""Pixel-space diffusion: schedule, denoiser, guidance, sampling, losses."""

from .guidance import DEFAULT_CFG_SCALE, cfg_combine
from .losses import loss_comp, loss_id
from .sampler import (
    DEFAULT_STEPS,
    SampleRequest,
    blend_background,
    ddim_step,
    ddim_timesteps,
    sample_composite,
)
from .schedule import BETA_END, BETA_START, NoiseSchedule, make_schedule, q_sample
from .unet import (
    BASE_INPUT_CHANNELS,
    VARIANTS,
    ConditionalUNet,
    DenoiserConfig,
    assemble_denoiser_input,
)

__all__ = [
    "BASE_INPUT_CHANNELS",
    "BETA_END",
    "BETA_START",
    "ConditionalUNet",
    "DEFAULT_CFG_SCALE",
    "DEFAULT_STEPS",
    "DenoiserConfig",
    "NoiseSchedule",
    "SampleRequest",
    "VARIANTS",
    "assemble_denoiser_input",
    "blend_background",
    "cfg_combine",
    "ddim_step",
    "ddim_timesteps",
    "loss_comp",
    "loss_id",
    "make_schedule",
    "q_sample",
    "sample_composite",
]
