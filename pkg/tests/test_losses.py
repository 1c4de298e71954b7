import numpy as np
import pytest
import torch
import torch.nn as nn

from idcompose.data.examples import CompositeExample, ViewPairExample
from idcompose.data.fitting import fit_object_in_mask
from idcompose.diffusion import (
    ConditionalUNet,
    DenoiserConfig,
    loss_comp,
    loss_id,
    make_schedule,
)
from idcompose.encoder import EncoderConfig, IdentityEncoder
from idcompose.errors import ConfigurationError

from .conftest import random_image

SIZE = 8
COND_DIM = 6
CHANNELS = {"cross_attention": 7, "concat": 10, "controlnet": 11}


@pytest.fixture(scope="module")
def encoder():
    torch.manual_seed(0)
    enc = IdentityEncoder(EncoderConfig(image_size=SIZE, patch_size=4, embed_dim=8,
                                        depth=1, heads=2, adapter_depth=1,
                                        cond_dim=COND_DIM))
    return enc.double()


@pytest.fixture(scope="module")
def schedule():
    return make_schedule(25)


def tiny_model(variant="cross_attention", seed=0):
    torch.manual_seed(seed)
    model = ConditionalUNet(DenoiserConfig(
        base_channels=4, channel_multipliers=(1,), attn_resolutions=(64,),
        cond_dim=COND_DIM, in_channels=CHANNELS[variant], variant=variant)).double()
    g = torch.Generator().manual_seed(seed + 100)
    for p in model.parameters():
        with torch.no_grad():
            p.copy_(torch.randn(p.shape, generator=g, dtype=torch.float64) * 0.2)
    return model


class FixedOutput(nn.Module):
    """Denoiser stand-in returning a preset tensor regardless of input."""

    def __init__(self, out: torch.Tensor):
        super().__init__()
        self.config = DenoiserConfig()
        self.out = out
        self.marker = nn.Parameter(torch.zeros((), dtype=out.dtype))

    def forward(self, x_in, t, cond):
        assert x_in.shape[1] == self.config.in_channels
        return self.out


def replay_draws(seed, schedule, shape):
    """Reproduce the (t, eps) the loss draws from a generator with this seed."""
    r = np.random.default_rng(seed)
    t = r.integers(schedule.T, size=shape[0])
    eps = r.standard_normal(shape)
    return t, eps


def make_pairs(rng, n=2):
    return [ViewPairExample(random_image(rng, SIZE, SIZE), random_image(rng, SIZE, SIZE))
            for _ in range(n)]


def make_composites(rng, n=2, mask=None):
    out = []
    for _ in range(n):
        m = mask if mask is not None else (rng.random((SIZE, SIZE)) > 0.5).astype(np.float32)
        out.append(CompositeExample(
            object_image=random_image(rng, SIZE, SIZE),
            background=random_image(rng, SIZE, SIZE),
            mask=m, target=random_image(rng, SIZE, SIZE), mask_level=2))
    return out


def encode_one(encoder, image01):
    x = torch.from_numpy(np.ascontiguousarray(image01.transpose(2, 0, 1)))[None].double()
    return encoder(x)


class TestLossId:
    def test_stub_returning_eps_gives_zero(self, encoder, schedule, rng):
        batch = make_pairs(rng)
        t, eps = replay_draws(31, schedule, (2, 3, SIZE, SIZE))
        stub = FixedOutput(torch.from_numpy(eps))
        loss = loss_id(batch, stub, encoder, schedule, np.random.default_rng(31))
        assert loss.item() == 0.0

    def test_stub_returning_zero_gives_mean_eps_sq(self, encoder, schedule, rng):
        batch = make_pairs(rng, n=16)
        t, eps = replay_draws(32, schedule, (16, 3, SIZE, SIZE))
        stub = FixedOutput(torch.zeros(16, 3, SIZE, SIZE, dtype=torch.float64))
        loss = loss_id(batch, stub, encoder, schedule, np.random.default_rng(32))
        assert loss.item() == pytest.approx(np.mean(eps ** 2), abs=1e-12)
        # eps ~ N(0,1), so the mean square concentrates near 1
        assert loss.item() == pytest.approx(1.0, abs=0.15)

    def test_matches_loop_oracle(self, encoder, schedule, rng):
        model = tiny_model()
        batch = make_pairs(rng)
        loss = loss_id(batch, model, encoder, schedule, np.random.default_rng(9))
        t, eps = replay_draws(9, schedule, (2, 3, SIZE, SIZE))
        total, count = 0.0, 0
        for b, ex in enumerate(batch):
            tgt = (ex.target_view.astype(np.float32) * 2.0 - 1.0).transpose(2, 0, 1)
            ab = float(schedule.alpha_bar(int(t[b])))
            x_t = np.sqrt(ab) * tgt.astype(np.float64) + np.sqrt(1.0 - ab) * eps[b]
            x_in = np.concatenate([x_t, np.zeros_like(x_t),
                                   np.ones((1, SIZE, SIZE))], axis=0)
            cond = encode_one(encoder, ex.source_view)
            with torch.no_grad():
                eps_hat = model(torch.from_numpy(x_in)[None], int(t[b]), cond)[0].numpy()
            for c in range(3):
                for i in range(SIZE):
                    for j in range(SIZE):
                        diff = eps[b, c, i, j] - eps_hat[c, i, j]
                        total += diff * diff
                        count += 1
        assert loss.item() == pytest.approx(total / count, abs=1e-6)

    def test_full_dropout_uses_null_tokens(self, encoder, schedule, rng):
        model = tiny_model()
        batch = make_pairs(rng)
        loss = loss_id(batch, model, encoder, schedule, np.random.default_rng(13),
                       drop_prob=1.0)
        t, eps = replay_draws(13, schedule, (2, 3, SIZE, SIZE))
        x_t = []
        for b, ex in enumerate(batch):
            tgt = (ex.target_view.astype(np.float32) * 2.0 - 1.0).transpose(2, 0, 1)
            ab = float(schedule.alpha_bar(int(t[b])))
            x_t.append(np.sqrt(ab) * tgt.astype(np.float64) + np.sqrt(1.0 - ab) * eps[b])
        x_t = np.stack(x_t)
        x_in = np.concatenate([x_t, np.zeros_like(x_t),
                               np.ones((2, 1, SIZE, SIZE))], axis=1)
        with torch.no_grad():
            eps_hat = model(torch.from_numpy(x_in), torch.as_tensor(t),
                            encoder.null_conditioning(2)).numpy()
        assert loss.item() == pytest.approx(np.mean((eps - eps_hat) ** 2), abs=1e-9)

    def test_empty_batch_rejected(self, encoder, schedule):
        with pytest.raises(ConfigurationError):
            loss_id([], tiny_model(), encoder, schedule, np.random.default_rng(0))


class TestLossComp:
    def test_matches_masked_loop_oracle(self, encoder, schedule, rng):
        model = tiny_model()
        batch = make_composites(rng)
        loss = loss_comp(batch, model, encoder, schedule, np.random.default_rng(17))
        t, eps = replay_draws(17, schedule, (2, 3, SIZE, SIZE))
        total, count = 0.0, 0
        for b, ex in enumerate(batch):
            tgt = (ex.target.astype(np.float32) * 2.0 - 1.0).transpose(2, 0, 1)
            ab = float(schedule.alpha_bar(int(t[b])))
            x_t = np.sqrt(ab) * tgt.astype(np.float64) + np.sqrt(1.0 - ab) * eps[b]
            bg = ex.background.transpose(2, 0, 1).astype(np.float64)
            m = ex.mask.astype(np.float64)
            x_in = np.concatenate([x_t, (bg * 2.0 - 1.0) * (1.0 - m), m[None]], axis=0)
            cond = encode_one(encoder, ex.object_image)
            with torch.no_grad():
                eps_hat = model(torch.from_numpy(x_in)[None], int(t[b]), cond)[0].numpy()
            for c in range(3):
                for i in range(SIZE):
                    for j in range(SIZE):
                        diff = eps[b, c, i, j] - eps_hat[c, i, j]
                        total += m[i, j] * diff * diff
                        count += 1
        assert loss.item() == pytest.approx(total / count, abs=1e-6)

    def test_concat_variant_matches_loop_oracle(self, encoder, schedule, rng):
        model = tiny_model("concat")
        batch = make_composites(rng)
        loss = loss_comp(batch, model, encoder, schedule, np.random.default_rng(19))
        t, eps = replay_draws(19, schedule, (2, 3, SIZE, SIZE))
        total, count = 0.0, 0
        for b, ex in enumerate(batch):
            tgt = (ex.target.astype(np.float32) * 2.0 - 1.0).transpose(2, 0, 1)
            ab = float(schedule.alpha_bar(int(t[b])))
            x_t = np.sqrt(ab) * tgt.astype(np.float64) + np.sqrt(1.0 - ab) * eps[b]
            bg = ex.background.transpose(2, 0, 1).astype(np.float64)
            m = ex.mask.astype(np.float64)
            fit = fit_object_in_mask(ex.object_image,
                                     (ex.object_image.sum(axis=2) > 0).astype(np.float32),
                                     ex.background, ex.mask)
            fit = fit.transpose(2, 0, 1).astype(np.float64)
            x_in = np.concatenate([x_t, (bg * 2.0 - 1.0) * (1.0 - m), m[None],
                                   fit * 2.0 - 1.0], axis=0)
            cond = encode_one(encoder, ex.object_image)
            with torch.no_grad():
                eps_hat = model(torch.from_numpy(x_in)[None], int(t[b]), cond)[0].numpy()
            for c in range(3):
                for i in range(SIZE):
                    for j in range(SIZE):
                        diff = eps[b, c, i, j] - eps_hat[c, i, j]
                        total += m[i, j] * diff * diff
                        count += 1
        assert loss.item() == pytest.approx(total / count, abs=1e-6)

    def test_mask_of_ones_equals_unmasked_loss(self, encoder, schedule, rng):
        # no area normalization: a full mask reproduces the plain mean
        batch = make_composites(rng, mask=np.ones((SIZE, SIZE), dtype=np.float32))
        t, eps = replay_draws(23, schedule, (2, 3, SIZE, SIZE))
        stub = FixedOutput(torch.zeros(2, 3, SIZE, SIZE, dtype=torch.float64))
        loss = loss_comp(batch, stub, encoder, schedule, np.random.default_rng(23))
        assert loss.item() == pytest.approx(np.mean(eps ** 2), abs=1e-12)

    def test_mask_of_zeros_zero_loss_and_gradients(self, encoder, schedule, rng):
        model = tiny_model()
        batch = make_composites(rng, mask=np.zeros((SIZE, SIZE), dtype=np.float32))
        loss = loss_comp(batch, model, encoder, schedule, np.random.default_rng(29))
        assert loss.item() == 0.0
        loss.backward()
        for p in model.parameters():
            assert p.grad is None or not p.grad.any()

    def test_empty_batch_rejected(self, encoder, schedule):
        with pytest.raises(ConfigurationError):
            loss_comp([], tiny_model(), encoder, schedule, np.random.default_rng(0))


class TestGradients:
    def test_analytic_matches_central_differences(self, encoder, schedule, rng):
        model = tiny_model(seed=3)
        assert sum(p.numel() for p in model.parameters()) <= 5000
        batch = make_composites(rng, n=1)

        def eval_loss():
            return loss_comp(batch, model, encoder, schedule, np.random.default_rng(77))

        loss = eval_loss()
        loss.backward()
        grads = [p.grad.clone() for p in model.parameters()]

        worst = 0.0
        h = 1e-6
        with torch.no_grad():
            for p, g in zip(model.parameters(), grads):
                flat, gflat = p.view(-1), g.view(-1)
                for idx in range(flat.numel()):
                    orig = flat[idx].item()
                    flat[idx] = orig + h
                    lp = eval_loss().item()
                    flat[idx] = orig - h
                    lm = eval_loss().item()
                    flat[idx] = orig
                    num = (lp - lm) / (2 * h)
                    a = gflat[idx].item()
                    worst = max(worst, abs(a - num) / max(1e-6, abs(a), abs(num)))
        assert worst < 1e-3
