"""Command-line surface: data generation, training, composition, evaluation.

Every run is deterministic in its seed: model initialization derives from the
plan seed, and all sampling draws derive from the request seed.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np
import torch
import yaml

from . import __version__
from .buffers import load_image, load_mask, save_image
from .data.examples import build_stage2_example
from .data.manifest import DatasetSource
from .data.masks import coarsen_mask
from .data.synthetic import SyntheticConfig, generate_synthetic_dataset
from .diffusion import (
    ConditionalUNet,
    DenoiserConfig,
    SampleRequest,
    make_schedule,
    sample_composite,
)
from .encoder import EncoderConfig, IdentityEncoder
from .errors import ConfigurationError, IdcomposeError
from .evaluation import (
    ClassTokenExtractor,
    RandomConvExtractor,
    clustering_quality,
    evaluate_run,
    write_projection,
    write_report,
)
from .seeding import derive_seed
from .training import (
    DEFAULT_T,
    models_from_checkpoint,
    plan_from_dict,
    run_stage1,
    run_stage2,
)


def _fail_cleanly(fn):
    """Runtime failures exit 1 with a single diagnostic line."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (IdcomposeError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


def _section(data: dict, key: str, builder, tuple_fields=()):
    raw = data.pop(key, None)
    if raw is None:
        return builder()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"config section {key!r} must be a mapping")
    for name in tuple_fields:
        if name in raw:
            raw[name] = tuple(raw[name])
    try:
        return builder(**raw)
    except TypeError as exc:
        raise ConfigurationError(f"bad {key} section: {exc}") from exc


def load_experiment(path):
    """Experiment config: TrainPlan fields plus optional model sections.

    Top level maps 1:1 to the plan; `encoder`, `denoiser`, and `schedule_T`
    configure the models and noise schedule for fresh runs.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"experiment config not found: {path}")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict):
        raise ConfigurationError(f"experiment config must be a mapping: {path}")
    encoder_config = _section(data, "encoder", EncoderConfig)
    denoiser_config = _section(data, "denoiser", DenoiserConfig,
                               tuple_fields=("channel_multipliers", "attn_resolutions"))
    schedule_t = int(data.pop("schedule_T", DEFAULT_T))
    plan = plan_from_dict(data)
    return plan, encoder_config, denoiser_config, schedule_t


@click.group(context_settings={"show_default": True})
@click.version_option(version=__version__)
def main():
    """Identity-preserving object compositing toolkit."""


@main.command()
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Dataset output directory.")
@click.option("--objects", type=int, default=4, help="Number of distinct objects.")
@click.option("--views", type=int, default=6, help="Views per object.")
@click.option("--scenes", type=int, default=2, help="Number of scenes.")
@click.option("--frames", type=int, default=10, help="Frames per scene.")
@click.option("--size", type=int, default=64, help="Image side in pixels.")
@click.option("--seed", type=int, default=0, help="Generation seed.")
@_fail_cleanly
def datagen(out, objects, views, scenes, frames, size, seed):
    """Write a synthetic multi-view and scene dataset with a manifest."""
    config = SyntheticConfig(num_objects=objects, views_per_object=views,
                             num_scenes=scenes, frames_per_scene=frames,
                             image_size=size, seed=seed)
    generate_synthetic_dataset(config, out)
    records = DatasetSource.open(out).records
    click.echo(f"wrote {len(records)} records to {out}")


def _init_models(plan, encoder_config, denoiser_config):
    torch.manual_seed(derive_seed("cli-model-init", plan.seed))
    return IdentityEncoder(encoder_config), ConditionalUNet(denoiser_config)


@main.command("train-stage1")
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              required=True, help="Experiment config (plan + model sections).")
@click.option("--data", "data_dir", type=click.Path(path_type=Path),
              required=True, help="Dataset directory with a manifest.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Run directory for checkpoints and logs.")
@click.option("--resume", type=click.Path(path_type=Path), default=None,
              help="Checkpoint to resume from.")
@_fail_cleanly
def train_stage1(config_path, data_dir, out, resume):
    """Pretrain the identity encoder on multi-view pairs."""
    plan, encoder_config, denoiser_config, schedule_t = load_experiment(config_path)
    encoder, denoiser = _init_models(plan, encoder_config, denoiser_config)
    last = run_stage1(plan, DatasetSource.open(data_dir), encoder, denoiser, out,
                      schedule=make_schedule(schedule_t), resume_from=resume)
    click.echo(str(last))


@main.command("train-stage2")
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              required=True, help="Experiment config (plan + model sections).")
@click.option("--data", "data_dir", type=click.Path(path_type=Path),
              required=True, help="Dataset directory with a manifest.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Run directory for checkpoints and logs.")
@click.option("--encoder-ckpt", type=click.Path(path_type=Path), default=None,
              help="Stage-1 checkpoint providing the pretrained encoder.")
@click.option("--resume", type=click.Path(path_type=Path), default=None,
              help="Checkpoint to resume from.")
@click.option("--warm-start", is_flag=True,
              help="Copy shape-matching denoiser weights from the encoder checkpoint.")
@_fail_cleanly
def train_stage2(config_path, data_dir, out, encoder_ckpt, resume, warm_start):
    """Train the mask-conditioned compositor from a pretrained encoder."""
    if encoder_ckpt is None:
        raise ConfigurationError("--encoder-ckpt is required for stage 2")
    plan, _, denoiser_config, schedule_t = load_experiment(config_path)
    torch.manual_seed(derive_seed("cli-model-init", plan.seed))
    denoiser = ConditionalUNet(denoiser_config)
    last = run_stage2(plan, DatasetSource.open(data_dir), encoder_ckpt, denoiser,
                      out, schedule=make_schedule(schedule_t), resume_from=resume,
                      warm_start_denoiser=warm_start)
    click.echo(str(last))


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True,
              help="Trained stage-2 checkpoint.")
@click.option("--background", type=click.Path(path_type=Path), required=True,
              help="Background PNG.")
@click.option("--object", "object_path", type=click.Path(path_type=Path),
              required=True, help="Object PNG (background removed).")
@click.option("--mask", type=click.Path(path_type=Path), required=True,
              help="Placement mask PNG.")
@click.option("--mask-level", type=click.IntRange(1, 4), default=None,
              help="Coarsen the mask to this level before sampling.")
@click.option("--steps", type=int, default=50, help="Denoising steps.")
@click.option("--cfg", type=float, default=3.0, help="Guidance scale.")
@click.option("--seed", type=int, default=0, help="Sampling seed.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Composite PNG output path.")
@_fail_cleanly
def compose(checkpoint, background, object_path, mask, mask_level, steps, cfg,
            seed, out):
    """Composite the object into the background inside the mask."""
    encoder, denoiser, _ = models_from_checkpoint(checkpoint)
    mask_arr = load_mask(mask)
    if mask_level is not None:
        mask_arr = coarsen_mask(mask_arr, mask_level,
                                rng_seed=derive_seed("compose-mask", seed))
    request = SampleRequest(background=load_image(background), mask=mask_arr,
                            object_image=load_image(object_path), steps=steps,
                            cfg_scale=cfg, seed=seed)
    save_image(out, sample_composite(request, denoiser, encoder))
    click.echo(str(out))


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True,
              help="Trained stage-2 checkpoint.")
@click.option("--data", "data_dir", type=click.Path(path_type=Path),
              required=True, help="Dataset directory with held-out scenes.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Report output path.")
@click.option("--level", type=click.IntRange(1, 4), default=2,
              help="Mask coarseness for the test tuples.")
@click.option("--steps", type=int, default=50, help="Denoising steps.")
@click.option("--cfg", type=float, default=3.0, help="Guidance scale.")
@click.option("--seed", type=int, default=0, help="Evaluation seed.")
@click.option("--crop-size", type=int, default=16,
              help="Extractor input size for cropped objects.")
@click.option("--extractor-dim", type=int, default=32,
              help="Random-feature dimensionality for realism statistics.")
@_fail_cleanly
def evaluate(checkpoint, data_dir, out, level, steps, cfg, seed, crop_size,
             extractor_dim):
    """Score composites against held-out targets and write a report."""
    encoder, denoiser, _ = models_from_checkpoint(checkpoint)
    dataset = DatasetSource.open(data_dir)
    groups = dataset.groups("scene")
    examples = [
        build_stage2_example(groups[sid], dataset.root, level,
                             derive_seed("eval-data", seed, sid), route="image")
        for sid in sorted(groups)
    ]
    extractor = RandomConvExtractor(dim=extractor_dim, input_size=crop_size,
                                    seed=seed)
    report = evaluate_run(examples, denoiser, encoder, extractor, steps=steps,
                          cfg_scale=cfg, seed=seed)
    write_report(report, out)
    click.echo(f"fid {report.fid:.6g}  similarity_mean {report.similarity_mean:.6g}")


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True,
              help="Checkpoint providing the encoder.")
@click.option("--data", "data_dir", type=click.Path(path_type=Path),
              required=True, help="Dataset directory with multi-view groups.")
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Projection point-list output path.")
@click.option("--seed", type=int, default=0, help="Projection seed.")
@_fail_cleanly
def cluster(checkpoint, data_dir, out, seed):
    """Cluster multi-view embeddings and report the silhouette."""
    encoder, _, _ = models_from_checkpoint(checkpoint)
    dataset = DatasetSource.open(data_dir)
    extractor = ClassTokenExtractor(encoder)
    images, labels = [], []
    for oid, records in sorted(dataset.groups("multiview").items()):
        for record in records:
            images.append(load_image(dataset.root / record.image_path))
            labels.append(oid)
    result = clustering_quality(extractor(images), np.asarray(labels),
                                projection_seed=seed)
    write_projection(out, result.labels, result.projection)
    click.echo(f"silhouette {result.silhouette:.6g}")


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True,
              help="Trained stage-2 checkpoint to serve.")
@click.option("--host", default="127.0.0.1", help="Bind address.")
@click.option("--port", type=int, default=8000, help="Bind port.")
@_fail_cleanly
def serve(checkpoint, host, port):
    """Serve composition over HTTP for the mask studio."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(checkpoint), host=host, port=port)


if __name__ == "__main__":
    main()
