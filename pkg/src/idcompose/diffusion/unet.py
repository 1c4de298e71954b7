"""Toy conditional UNet denoiser and its input-assembly variants.

The base input is 7 channels: noisy image (3), background with the mask
region zeroed (3), and the mask itself (1). The concat variant appends the
inserted object (3 more channels) through a zero-initialized extra input
convolution; the controlnet variant runs a trainable copy of the encoder side
on (inserted object, inverted mask) and injects its features through
zero-initialized projections. Both variants therefore reproduce the base
forward pass exactly at initialization.

Attention placement is configured by nominal resolution assuming a 64-pixel
input; the network itself is size-agnostic as long as spatial dims divide
2^levels.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigurationError, DimensionError
from ..encoder.conditioning import ConditioningTokens
from ..encoder.vit import sinusoidal_features

VARIANTS = ("cross_attention", "concat", "controlnet")
NOMINAL_SIZE = 64
BASE_INPUT_CHANNELS = 7  # x_t (3) + holed background (3) + mask (1)
CONCAT_EXTRA_CHANNELS = 3  # inserted object
CONTROL_EXTRA_CHANNELS = 4  # inserted object (3) + inverted mask (1)

_VARIANT_CHANNELS = {
    "cross_attention": BASE_INPUT_CHANNELS,
    "concat": BASE_INPUT_CHANNELS + CONCAT_EXTRA_CHANNELS,
    "controlnet": BASE_INPUT_CHANNELS + CONTROL_EXTRA_CHANNELS,
}


@dataclass(frozen=True)
class DenoiserConfig:
    base_channels: int = 32
    channel_multipliers: tuple[int, ...] = (1, 2, 4)
    attn_resolutions: tuple[int, ...] = (16, 8)
    cond_dim: int = 128
    in_channels: int = BASE_INPUT_CHANNELS
    variant: str = "cross_attention"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        expected = _VARIANT_CHANNELS[self.variant]
        if self.in_channels != expected:
            raise ConfigurationError(
                f"variant {self.variant!r} consumes {expected} assembled channels, "
                f"config says {self.in_channels}")
        if self.base_channels < 1 or not self.channel_multipliers:
            raise ConfigurationError("base_channels >= 1 and at least one multiplier required")

    @property
    def levels(self) -> int:
        return len(self.channel_multipliers)

    @property
    def size_divisor(self) -> int:
        # spatial dims must divide this for the down/up paths to mirror
        return 2 ** self.levels


def _groups(channels: int) -> int:
    return math.gcd(8, channels)


class ResBlock(nn.Module):
    def __init__(self, cin: int, cout: int, temb_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(_groups(cin), cin)
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.temb_proj = nn.Linear(temb_dim, cout)
        self.norm2 = nn.GroupNorm(_groups(cout), cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.skip = nn.Conv2d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    """Image features attend over the conditioning token sequence."""

    def __init__(self, channels: int, cond_dim: int):
        super().__init__()
        self.heads = math.gcd(4, channels)
        self.head_dim = channels // self.heads
        self.scale = self.head_dim ** -0.5
        self.norm = nn.GroupNorm(_groups(channels), channels)
        self.to_q = nn.Conv2d(channels, channels, 1)
        self.to_k = nn.Linear(cond_dim, channels)
        self.to_v = nn.Linear(cond_dim, channels)
        self.proj = nn.Conv2d(channels, channels, 1)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        q = self.to_q(self.norm(x)).reshape(b, self.heads, self.head_dim, h * w)
        k = self.to_k(cond).reshape(b, -1, self.heads, self.head_dim).permute(0, 2, 3, 1)
        v = self.to_v(cond).reshape(b, -1, self.heads, self.head_dim).permute(0, 2, 3, 1)
        attn = torch.softmax(q.transpose(-2, -1) @ k * self.scale, dim=-1)  # (b, heads, hw, S)
        out = (attn @ v.transpose(-2, -1)).transpose(-2, -1).reshape(b, c, h, w)
        return x + self.proj(out)


class Downsample(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x)


class Upsample(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(F.interpolate(x, scale_factor=2.0, mode="nearest"))


def _zero_conv(channels: int) -> nn.Conv2d:
    conv = nn.Conv2d(channels, channels, 1)
    nn.init.zeros_(conv.weight)
    nn.init.zeros_(conv.bias)
    return conv


class _DownPath(nn.Module):
    """conv_in -> per-level (res, attn?, down) -> middle (res, attn, res)."""

    def __init__(self, config: DenoiserConfig, in_channels: int, temb_dim: int):
        super().__init__()
        base = config.base_channels
        self.conv_in = nn.Conv2d(in_channels, base, 3, padding=1)
        chans = [base * m for m in config.channel_multipliers]
        self.res_blocks = nn.ModuleList()
        self.attn_blocks = nn.ModuleList()
        self.downs = nn.ModuleList()
        prev = base
        for i, ch in enumerate(chans):
            res_nominal = NOMINAL_SIZE >> i
            self.res_blocks.append(ResBlock(prev, ch, temb_dim))
            self.attn_blocks.append(
                CrossAttention(ch, config.cond_dim)
                if res_nominal in config.attn_resolutions else None)
            self.downs.append(Downsample(ch))
            prev = ch
        mid = chans[-1]
        self.mid_res1 = ResBlock(mid, mid, temb_dim)
        self.mid_attn = CrossAttention(mid, config.cond_dim)
        self.mid_res2 = ResBlock(mid, mid, temb_dim)

    def forward(self, x, temb, cond):
        return self.run_from(self.conv_in(x), temb, cond)

    def run_from(self, h, temb, cond):
        """Continue from a stem activation (lets variants alter the stem)."""
        skips = []
        for res, attn, down in zip(self.res_blocks, self.attn_blocks, self.downs):
            h = res(h, temb)
            if attn is not None:
                h = attn(h, cond)
            skips.append(h)
            h = down(h)
        h = self.mid_res1(h, temb)
        h = self.mid_attn(h, cond)
        h = self.mid_res2(h, temb)
        return skips, h


class ControlBranch(nn.Module):
    """Trainable copy of the encoder side fed the control input."""

    def __init__(self, config: DenoiserConfig, base_down: _DownPath, temb_dim: int):
        super().__init__()
        self.path = copy.deepcopy(base_down)
        # the copy keeps the base weights but needs its own 4-channel stem
        base = config.base_channels
        self.path.conv_in = nn.Conv2d(CONTROL_EXTRA_CHANNELS, base, 3, padding=1)
        chans = [base * m for m in config.channel_multipliers]
        self.skip_projs = nn.ModuleList([_zero_conv(ch) for ch in chans])
        self.mid_proj = _zero_conv(chans[-1])

    def forward(self, control, temb, cond):
        skips, mid = self.path(control, temb, cond)
        return [proj(s) for proj, s in zip(self.skip_projs, skips)], self.mid_proj(mid)


class ConditionalUNet(nn.Module):
    """eps-prediction UNet; conditioning enters through cross-attention."""

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        self.config = config
        self.schedule = None  # attached by training / checkpoint load; needed to sample
        base = config.base_channels
        temb_dim = base * 4
        self.time_mlp = nn.Sequential(
            nn.Linear(base, temb_dim), nn.SiLU(), nn.Linear(temb_dim, temb_dim))

        self.down = _DownPath(config, BASE_INPUT_CHANNELS, temb_dim)
        if config.variant == "concat":
            self.extra_in = nn.Conv2d(CONCAT_EXTRA_CHANNELS, base, 3, padding=1)
            nn.init.zeros_(self.extra_in.weight)
            nn.init.zeros_(self.extra_in.bias)
        if config.variant == "controlnet":
            self.control = ControlBranch(config, self.down, temb_dim)

        chans = [base * m for m in config.channel_multipliers]
        self.ups = nn.ModuleList()
        self.up_res = nn.ModuleList()
        self.up_attn = nn.ModuleList()
        prev = chans[-1]
        for i in reversed(range(config.levels)):
            ch = chans[i]
            res_nominal = NOMINAL_SIZE >> i
            self.ups.append(Upsample(prev))
            self.up_res.append(ResBlock(prev + ch, ch, temb_dim))
            self.up_attn.append(
                CrossAttention(ch, config.cond_dim)
                if res_nominal in config.attn_resolutions else None)
            prev = ch
        self.out_norm = nn.GroupNorm(_groups(prev), prev)
        self.out_conv = nn.Conv2d(prev, 3, 3, padding=1)
        nn.init.zeros_(self.out_conv.weight)
        nn.init.zeros_(self.out_conv.bias)

    def forward(self, x_in: torch.Tensor, t, cond) -> torch.Tensor:
        if isinstance(cond, ConditioningTokens):
            cond = cond.tokens
        if cond.ndim != 3 or cond.shape[-1] != self.config.cond_dim:
            raise ConfigurationError(
                f"conditioning must be (B, S, {self.config.cond_dim}), got {tuple(cond.shape)}")
        if x_in.shape[1] != self.config.in_channels:
            raise ConfigurationError(
                f"variant {self.config.variant!r} expects {self.config.in_channels} channels, "
                f"got {x_in.shape[1]}")
        if x_in.shape[-1] % self.config.size_divisor or x_in.shape[-2] % self.config.size_divisor:
            raise DimensionError(
                f"spatial dims must divide {self.config.size_divisor}, got {tuple(x_in.shape[-2:])}")

        if not torch.is_tensor(t):
            t = torch.as_tensor([t] * x_in.shape[0], device=x_in.device)
        dtype = self.out_conv.weight.dtype
        temb = self.time_mlp(sinusoidal_features(t.to(dtype), self.config.base_channels))

        base_x = x_in[:, :BASE_INPUT_CHANNELS]
        h0 = self.down.conv_in(base_x)
        if self.config.variant == "concat":
            # zero-initialized stem: contributes nothing until trained
            h0 = h0 + self.extra_in(x_in[:, BASE_INPUT_CHANNELS:])
        skips, h = self.down.run_from(h0, temb, cond)
        if self.config.variant == "controlnet":
            ctrl_skips, ctrl_mid = self.control(x_in[:, BASE_INPUT_CHANNELS:], temb, cond)
            skips = [s + c for s, c in zip(skips, ctrl_skips)]
            h = h + ctrl_mid

        for up, res, attn in zip(self.ups, self.up_res, self.up_attn):
            h = up(h)
            h = res(torch.cat([h, skips.pop()], dim=1), temb)
            if attn is not None:
                h = attn(h, cond)
        return self.out_conv(F.silu(self.out_norm(h)))


def assemble_denoiser_input(
    x_t: torch.Tensor,
    background: torch.Tensor,
    mask: torch.Tensor,
    variant: str = "cross_attention",
    object_fit: torch.Tensor | None = None,
) -> torch.Tensor:
    """Stack the per-variant denoiser input along channels.

    x_t is in [-1, 1]; background and object_fit in [0, 1] (mapped to signed
    here); mask in [0, 1] stays as-is. Shapes: x_t/background/object_fit
    (B, 3, H, W), mask (B, 1, H, W).
    """
    if variant not in VARIANTS:
        raise ConfigurationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if mask.ndim != 4 or mask.shape[1] != 1:
        raise DimensionError(f"mask must be (B, 1, H, W), got {tuple(mask.shape)}")
    if background.shape != x_t.shape:
        raise DimensionError(
            f"background shape {tuple(background.shape)} != x_t shape {tuple(x_t.shape)}")
    bg_signed = background * 2.0 - 1.0
    base = torch.cat([x_t, bg_signed * (1.0 - mask), mask], dim=1)
    if variant == "cross_attention":
        return base
    if object_fit is None:
        raise ConfigurationError(f"variant {variant!r} needs the inserted-object image")
    if object_fit.shape != x_t.shape:
        raise DimensionError(
            f"object_fit shape {tuple(object_fit.shape)} != x_t shape {tuple(x_t.shape)}")
    obj_signed = object_fit * 2.0 - 1.0
    if variant == "concat":
        return torch.cat([base, obj_signed], dim=1)
    return torch.cat([base, obj_signed, 1.0 - mask], dim=1)
