import numpy as np
import pytest
import torch
import torch.nn as nn

from idcompose.diffusion import (
    BASE_INPUT_CHANNELS,
    ConditionalUNet,
    DenoiserConfig,
    assemble_denoiser_input,
)
from idcompose.diffusion.unet import CrossAttention
from idcompose.errors import ConfigurationError, DimensionError

COND_DIM = 12


def small_config(variant="cross_attention", **kw):
    channels = {"cross_attention": 7, "concat": 10, "controlnet": 11}[variant]
    defaults = dict(base_channels=4, channel_multipliers=(1, 2), attn_resolutions=(32,),
                    cond_dim=COND_DIM, in_channels=channels, variant=variant)
    defaults.update(kw)
    return DenoiserConfig(**defaults)


def build(variant="cross_attention", seed=0, **kw):
    torch.manual_seed(seed)
    return ConditionalUNet(small_config(variant, **kw))


def randomize(model, seed=0, std=0.2):
    g = torch.Generator().manual_seed(seed)
    for p in model.parameters():
        with torch.no_grad():
            p.copy_(torch.randn(p.shape, generator=g) * std)


def inputs(rng, batch=2, size=16):
    x_t = torch.from_numpy(rng.uniform(-1, 1, (batch, 3, size, size))).float()
    bg = torch.from_numpy(rng.random((batch, 3, size, size))).float()
    mask = torch.from_numpy((rng.random((batch, 1, size, size)) > 0.5).astype(np.float32))
    obj = torch.from_numpy(rng.random((batch, 3, size, size))).float()
    cond = torch.from_numpy(rng.standard_normal((batch, 5, COND_DIM))).float()
    return x_t, bg, mask, obj, cond


class TestConfig:
    def test_channel_count_per_variant(self):
        assert small_config("cross_attention").in_channels == 7
        assert small_config("concat").in_channels == 10
        assert small_config("controlnet").in_channels == 11

    def test_wrong_channel_count_rejected(self):
        with pytest.raises(ConfigurationError):
            small_config("concat", in_channels=7)

    def test_unknown_variant_rejected(self):
        with pytest.raises(ConfigurationError):
            DenoiserConfig(variant="film")

    def test_size_divisor(self):
        assert small_config().size_divisor == 4
        assert DenoiserConfig(channel_multipliers=(1, 2, 4)).size_divisor == 8


class TestAssembly:
    def test_base_layout(self, rng):
        x_t, bg, mask, _, _ = inputs(rng)
        x_in = assemble_denoiser_input(x_t, bg, mask)
        assert x_in.shape[1] == BASE_INPUT_CHANNELS
        assert torch.equal(x_in[:, :3], x_t)
        # background channels are signed and zeroed inside the mask
        assert torch.allclose(x_in[:, 3:6], (bg * 2 - 1) * (1 - mask))
        assert torch.equal(x_in[:, 6:7], mask)

    def test_concat_appends_signed_object(self, rng):
        x_t, bg, mask, obj, _ = inputs(rng)
        x_in = assemble_denoiser_input(x_t, bg, mask, "concat", obj)
        assert x_in.shape[1] == 10
        assert torch.allclose(x_in[:, 7:10], obj * 2 - 1)

    def test_controlnet_appends_object_and_inverted_mask(self, rng):
        x_t, bg, mask, obj, _ = inputs(rng)
        x_in = assemble_denoiser_input(x_t, bg, mask, "controlnet", obj)
        assert x_in.shape[1] == 11
        assert torch.allclose(x_in[:, 7:10], obj * 2 - 1)
        assert torch.equal(x_in[:, 10:11], 1 - mask)

    def test_missing_object_rejected(self, rng):
        x_t, bg, mask, _, _ = inputs(rng)
        for variant in ("concat", "controlnet"):
            with pytest.raises(ConfigurationError):
                assemble_denoiser_input(x_t, bg, mask, variant)

    def test_bad_mask_shape_rejected(self, rng):
        x_t, bg, _, _, _ = inputs(rng)
        with pytest.raises(DimensionError):
            assemble_denoiser_input(x_t, bg, torch.zeros(2, 16, 16))


class TestForward:
    def test_output_shape_and_zero_init(self, rng):
        model = build()
        x_t, bg, mask, _, cond = inputs(rng)
        out = model(assemble_denoiser_input(x_t, bg, mask), 3, cond)
        assert out.shape == (2, 3, 16, 16)
        # zero-initialized output convolution: fresh models predict exactly 0
        assert torch.equal(out, torch.zeros_like(out))

    def test_deterministic(self, rng):
        model = build()
        randomize(model, seed=1)
        x_t, bg, mask, _, cond = inputs(rng)
        x_in = assemble_denoiser_input(x_t, bg, mask)
        assert torch.equal(model(x_in, 3, cond), model(x_in, 3, cond))

    def test_timestep_changes_output(self, rng):
        model = build()
        randomize(model, seed=1)
        x_t, bg, mask, _, cond = inputs(rng)
        x_in = assemble_denoiser_input(x_t, bg, mask)
        assert not torch.equal(model(x_in, 1, cond), model(x_in, 40, cond))

    def test_conditioning_changes_output(self, rng):
        model = build()
        randomize(model, seed=1)
        x_t, bg, mask, _, cond = inputs(rng)
        x_in = assemble_denoiser_input(x_t, bg, mask)
        assert not torch.equal(model(x_in, 3, cond), model(x_in, 3, cond + 0.3))

    def test_per_example_timesteps(self, rng):
        # a vector of timesteps routes each example through its own embedding
        model = build()
        randomize(model, seed=1)
        x_t, bg, mask, _, cond = inputs(rng)
        x_in = assemble_denoiser_input(x_t, bg, mask)
        t = torch.tensor([1, 40])
        out = model(x_in, t, cond)
        assert torch.allclose(out[0], model(x_in[:1], 1, cond[:1])[0], atol=1e-6)
        assert torch.allclose(out[1], model(x_in[1:], 40, cond[1:])[0], atol=1e-6)

    def test_wrong_channels_rejected(self, rng):
        model = build()
        _, _, _, _, cond = inputs(rng)
        with pytest.raises(ConfigurationError):
            model(torch.zeros(2, 10, 16, 16), 3, cond)

    def test_indivisible_size_rejected(self, rng):
        model = build()  # divisor 4
        _, _, _, _, cond = inputs(rng)
        with pytest.raises(DimensionError):
            model(torch.zeros(2, 7, 18, 18), 3, cond)

    def test_wrong_cond_dim_rejected(self, rng):
        model = build()
        x_t, bg, mask, _, _ = inputs(rng)
        with pytest.raises(ConfigurationError):
            model(assemble_denoiser_input(x_t, bg, mask), 3, torch.zeros(2, 5, COND_DIM + 1))


class TestAttentionPlacement:
    def test_nominal_resolutions(self):
        # three levels at nominal 64/32/16 with attn at (16, 8): only the last
        # level attends, plus the middle block which always does
        cfg = DenoiserConfig(base_channels=4, channel_multipliers=(1, 2, 4),
                             attn_resolutions=(16, 8), cond_dim=COND_DIM)
        model = ConditionalUNet(cfg)
        down_attn = [a is not None for a in model.down.attn_blocks]
        up_attn = [a is not None for a in model.up_attn]
        assert down_attn == [False, False, True]
        assert up_attn == [True, False, False]  # up path runs deepest first
        assert isinstance(model.down.mid_attn, CrossAttention)


def copy_shared_weights(src: ConditionalUNet, dst: ConditionalUNet):
    """Load every weight the two variants share; variant extras keep their init."""
    src_sd = src.state_dict()
    dst_sd = dst.state_dict()
    for k, v in src_sd.items():
        if k in dst_sd and dst_sd[k].shape == v.shape:
            dst_sd[k] = v.clone()
    dst.load_state_dict(dst_sd)


class TestVariantEquivalence:
    def base_and_inputs(self, rng):
        base = build("cross_attention", seed=5)
        randomize(base, seed=7)  # includes the output conv, so outputs are nonzero
        x_t, bg, mask, obj, cond = inputs(rng)
        ref = base(assemble_denoiser_input(x_t, bg, mask), 9, cond)
        assert ref.abs().max() > 0
        return base, (x_t, bg, mask, obj, cond), ref

    def test_concat_matches_base_at_init(self, rng):
        base, (x_t, bg, mask, obj, cond), ref = self.base_and_inputs(rng)
        model = build("concat", seed=11)
        copy_shared_weights(base, model)
        out = model(assemble_denoiser_input(x_t, bg, mask, "concat", obj), 9, cond)
        assert torch.equal(out, ref)  # additive zero stem: bit-exact

    def test_controlnet_matches_base_at_init(self, rng):
        base, (x_t, bg, mask, obj, cond), ref = self.base_and_inputs(rng)
        model = build("controlnet", seed=11)
        copy_shared_weights(base, model)
        out = model(assemble_denoiser_input(x_t, bg, mask, "controlnet", obj), 9, cond)
        assert torch.equal(out, ref)  # zero-init projections: bit-exact

    def test_trained_extras_break_equivalence(self, rng):
        # sanity that the extra paths are live once their weights move
        base, (x_t, bg, mask, obj, cond), ref = self.base_and_inputs(rng)
        model = build("concat", seed=11)
        copy_shared_weights(base, model)
        with torch.no_grad():
            nn.init.normal_(model.extra_in.weight, std=0.2)
        out = model(assemble_denoiser_input(x_t, bg, mask, "concat", obj), 9, cond)
        assert not torch.equal(out, ref)

    def test_control_branch_feeds_decoder(self, rng):
        base, (x_t, bg, mask, obj, cond), ref = self.base_and_inputs(rng)
        model = build("controlnet", seed=11)
        copy_shared_weights(base, model)
        with torch.no_grad():
            nn.init.normal_(model.control.mid_proj.weight, std=0.2)
        out = model(assemble_denoiser_input(x_t, bg, mask, "controlnet", obj), 9, cond)
        assert not torch.equal(out, ref)
