"""Two-stage training orchestration.

Each run writes into out_dir: a resolved copy of the plan (plan.yaml), a
per-step metrics log (metrics.tsv), and one checkpoint per epoch. Example
order and every stochastic draw derive from (seed, epoch, step), so a resumed
run retraces the interrupted one exactly.
"""

from __future__ import annotations

from pathlib import Path

import torch

from ..data.examples import build_stage1_example, build_stage2_example
from ..data.manifest import DatasetSource
from ..diffusion.losses import loss_comp, loss_id
from ..diffusion.schedule import make_schedule
from ..diffusion.unet import ConditionalUNet
from ..encoder.conditioning import IdentityEncoder
from ..errors import ConfigurationError, DatasetError
from ..seeding import derive_seed, rng_for
from .checkpoint import TrainState, load_checkpoint, save_checkpoint
from .plan import TrainPlan, lr_for, phase_for, save_plan

DEFAULT_T = 1000
GRAD_CLIP_NORM = 1.0
METRICS_NAME = "metrics.tsv"
PLAN_NAME = "plan.yaml"
METRICS_HEADER = "step\tepoch\tphase\tloss\tlr_adapter\tlr_unet"


def checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:04d}.ckpt"


def _module_state(module) -> dict:
    return {k: v.detach().clone() for k, v in module.state_dict().items()}


def _set_requires_grad(params, flag: bool) -> None:
    for p in params:
        p.requires_grad_(flag)


def _encoder_side_params(denoiser: ConditionalUNet):
    params = list(denoiser.down.parameters())
    if hasattr(denoiser, "extra_in"):
        params += list(denoiser.extra_in.parameters())
    if hasattr(denoiser, "control"):
        params += list(denoiser.control.parameters())
    return params


def _apply_freezes(plan: TrainPlan, encoder: IdentityEncoder, denoiser: ConditionalUNet,
                   force_backbone_freeze: bool) -> None:
    encoder.set_trainable("backbone", not (plan.freeze.backbone or force_backbone_freeze))
    encoder.set_trainable("adapter", not plan.freeze.adapter)
    _set_requires_grad(denoiser.parameters(), not plan.freeze.unet)
    if not plan.freeze.unet and plan.freeze.unet_encoder:
        _set_requires_grad(_encoder_side_params(denoiser), False)


def _resolve_schedule(denoiser: ConditionalUNet, schedule):
    if schedule is None:
        schedule = getattr(denoiser, "schedule", None)
    if schedule is None:
        schedule = make_schedule(DEFAULT_T)
    denoiser.schedule = schedule
    return schedule


def _build_optimizer(plan: TrainPlan, encoder: IdentityEncoder, denoiser: ConditionalUNet):
    """AdamW over the trainable parts, one named group per learning rate."""
    adapter_params = [p for p in list(encoder.adapter.parameters()) + [encoder.null_tokens]
                      if p.requires_grad]
    backbone_params = [p for p in encoder.backbone.parameters() if p.requires_grad]
    unet_params = [p for p in denoiser.parameters() if p.requires_grad]

    groups, index = [], {}
    for name, params, lr in (("adapter", adapter_params, plan.lr_adapter),
                             ("backbone", backbone_params, plan.lr_encoder),
                             ("unet", unet_params, plan.lr_unet)):
        if params:
            index[name] = len(groups)
            groups.append({"params": params, "lr": lr})
    if not groups:
        raise ConfigurationError("every parameter group is frozen; nothing to train")
    opt = torch.optim.AdamW(groups, betas=(0.9, 0.999), weight_decay=0.01)
    trainable = [p for g in groups for p in g["params"]]
    return opt, index, trainable


def _restore(resume_from, plan: TrainPlan, encoder, denoiser, opt) -> tuple[int, int]:
    state = load_checkpoint(resume_from)
    if state.plan != plan:
        raise ConfigurationError("resume checkpoint was written under a different plan")
    encoder.load_state_dict(state.encoder_state)
    denoiser.load_state_dict(state.denoiser_state)
    if state.optimizer_state is not None:
        opt.load_state_dict(state.optimizer_state)
    return state.epoch, state.global_step


def _train(plan: TrainPlan, encoder: IdentityEncoder, denoiser: ConditionalUNet,
           out_dir, schedule, resume_from, group_ids, make_batch,
           loss_fn, force_backbone_freeze=False) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schedule = _resolve_schedule(denoiser, schedule)
    _apply_freezes(plan, encoder, denoiser, force_backbone_freeze)
    opt, group_index, trainable = _build_optimizer(plan, encoder, denoiser)

    start_epoch, global_step = 0, 0
    if resume_from is not None:
        start_epoch, global_step = _restore(resume_from, plan, encoder, denoiser, opt)

    save_plan(plan, out / PLAN_NAME)
    metrics_path = out / METRICS_NAME
    mode = "a" if (resume_from is not None and metrics_path.exists()) else "w"
    last_path = Path(resume_from) if resume_from is not None else None

    with open(metrics_path, mode) as metrics:
        if mode == "w":
            metrics.write(METRICS_HEADER + "\n")
        for epoch in range(start_epoch, plan.epochs):
            lr_adapter = lr_for("adapter", epoch, plan)
            lr_unet = lr_for("unet", epoch, plan)
            if "adapter" in group_index:
                opt.param_groups[group_index["adapter"]]["lr"] = lr_adapter
            if "unet" in group_index:
                opt.param_groups[group_index["unet"]]["lr"] = lr_unet

            order = rng_for("epoch-order", plan.seed, epoch).permutation(len(group_ids))
            for step_start in range(0, len(order), plan.batch_size):
                ids = [group_ids[i] for i in order[step_start: step_start + plan.batch_size]]
                step = step_start // plan.batch_size
                batch = make_batch(ids, epoch)
                rng = rng_for("loss-step", plan.seed, epoch, step)
                loss = loss_fn(batch, rng)
                opt.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(trainable, GRAD_CLIP_NORM)
                opt.step()
                metrics.write(f"{global_step}\t{epoch}\t{phase_for(epoch, plan)}\t"
                              f"{loss.item():.10g}\t{lr_adapter:.10g}\t{lr_unet:.10g}\n")
                global_step += 1

            state = TrainState(
                plan=plan, epoch=epoch + 1, global_step=global_step,
                encoder_config=encoder.config, denoiser_config=denoiser.config,
                schedule_T=schedule.T,
                encoder_state=_module_state(encoder),
                denoiser_state=_module_state(denoiser),
                optimizer_state=opt.state_dict(),
            )
            last_path = out / checkpoint_name(epoch + 1)
            save_checkpoint(last_path, state)

    if last_path is None:
        raise ConfigurationError("plan trained no epochs and no resume checkpoint given")
    return last_path


def run_stage1(plan: TrainPlan, dataset: DatasetSource, encoder: IdentityEncoder,
               denoiser: ConditionalUNet, out_dir, schedule=None,
               resume_from=None) -> Path:
    """Identity pretraining over multi-view groups; returns the final checkpoint."""
    if plan.stage != 1:
        raise ConfigurationError(f"run_stage1 needs a stage-1 plan, got stage {plan.stage}")
    groups = {oid: recs for oid, recs in dataset.groups("multiview").items()
              if len(recs) >= 2}
    if not groups:
        raise DatasetError("stage 1 needs at least one object with two or more views")
    group_ids = sorted(groups)

    def make_batch(ids, epoch):
        seed = derive_seed("stage1-data", plan.seed, epoch)
        return [build_stage1_example(groups[oid], dataset.root, seed) for oid in ids]

    def loss_fn(batch, rng):
        return loss_id(batch, denoiser, encoder, denoiser.schedule, rng,
                       drop_prob=plan.drop_prob)

    return _train(plan, encoder, denoiser, out_dir, schedule, resume_from,
                  group_ids, make_batch, loss_fn)


def run_stage2(plan: TrainPlan, dataset: DatasetSource, encoder_checkpoint,
               denoiser: ConditionalUNet, out_dir, schedule=None,
               resume_from=None, warm_start_denoiser: bool = False) -> Path:
    """Compositing training from a pretrained encoder; returns the final checkpoint.

    The encoder is rebuilt from encoder_checkpoint and its backbone frozen.
    warm_start_denoiser additionally copies every shape-matching denoiser
    weight from that checkpoint (the denoiser trains from scratch otherwise).
    """
    if plan.stage != 2:
        raise ConfigurationError(f"run_stage2 needs a stage-2 plan, got stage {plan.stage}")
    if encoder_checkpoint is None or not Path(encoder_checkpoint).is_file():
        raise ConfigurationError(f"encoder checkpoint required, got {encoder_checkpoint}")
    source = load_checkpoint(encoder_checkpoint)
    encoder = IdentityEncoder(source.encoder_config)
    encoder.load_state_dict(source.encoder_state)
    if warm_start_denoiser:
        own = denoiser.state_dict()
        for key, value in source.denoiser_state.items():
            if key in own and own[key].shape == value.shape:
                own[key] = value
        denoiser.load_state_dict(own)

    groups = dataset.groups("scene")
    if plan.route == "video":
        groups = {sid: recs for sid, recs in groups.items() if len(recs) >= 2}
    if not groups:
        raise DatasetError(f"stage 2 ({plan.route} route) found no usable scene groups")
    group_ids = sorted(groups)

    def make_batch(ids, epoch):
        seed = derive_seed("stage2-data", plan.seed, epoch)
        batch = []
        for sid in ids:
            level = 1 + int(rng_for("stage2-level", plan.seed, epoch, sid).integers(4))
            batch.append(build_stage2_example(
                groups[sid], dataset.root, level, seed,
                route=plan.route, window=plan.temporal_window))
        return batch

    def loss_fn(batch, rng):
        return loss_comp(batch, denoiser, encoder, denoiser.schedule, rng,
                         drop_prob=plan.drop_prob)

    return _train(plan, encoder, denoiser, out_dir, schedule, resume_from,
                  group_ids, make_batch, loss_fn, force_backbone_freeze=True)


def models_from_checkpoint(path) -> tuple[IdentityEncoder, ConditionalUNet, TrainState]:
    """Rebuild eval-mode models (schedule attached) from a checkpoint file."""
    state = load_checkpoint(path)
    encoder = IdentityEncoder(state.encoder_config)
    encoder.load_state_dict(state.encoder_state)
    denoiser = ConditionalUNet(state.denoiser_config)
    denoiser.load_state_dict(state.denoiser_state)
    denoiser.schedule = make_schedule(state.schedule_T)
    encoder.eval()
    denoiser.eval()
    return encoder, denoiser, state
