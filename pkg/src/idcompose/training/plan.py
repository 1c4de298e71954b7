"""Experiment plans and the two-phase learning-rate schedule.

Stage 2 trains the conditioning adapter and the denoiser at deliberately
unequal rates and swaps them at swap_epoch: the adapter leads in phase A, the
denoiser in phase B. Stage-1 plans default to never swapping.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from ..data.video import DEFAULT_WINDOW
from ..errors import ConfigurationError

STAGES = (1, 2)
COMPONENTS = ("adapter", "unet")
ROUTES = ("video", "image")

DEFAULT_LR_FAST = 4e-5
DEFAULT_LR_SLOW = 4e-6
DEFAULT_LR_ENCODER = 4e-6
DEFAULT_DROP_PROB = {1: 0.05, 2: 0.1}
DEFAULT_TEMPORAL_WINDOW = DEFAULT_WINDOW  # frame pairs drawn within +-7


@dataclass(frozen=True)
class FreezeFlags:
    backbone: bool = False
    adapter: bool = False
    unet: bool = False
    unet_encoder: bool = False  # restrict denoiser training to decoder-side blocks


@dataclass(frozen=True)
class TrainPlan:
    stage: int
    epochs: int
    batch_size: int = 16
    lr_adapter: float = DEFAULT_LR_FAST
    lr_unet: float = DEFAULT_LR_SLOW
    lr_encoder: float = DEFAULT_LR_ENCODER
    swap_epoch: int | None = None  # stage 1: epochs (never swap); stage 2: epochs // 2
    drop_prob: float | None = None  # per-stage defaults 0.05 / 0.1
    temporal_window: int = DEFAULT_TEMPORAL_WINDOW
    route: str = "video"  # stage-2 example construction route
    freeze: FreezeFlags = field(default_factory=FreezeFlags)
    seed: int = 0

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ConfigurationError(f"stage must be one of {STAGES}, got {self.stage}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        for name in ("lr_adapter", "lr_unet", "lr_encoder"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be > 0")
        if self.swap_epoch is None:
            default = self.epochs if self.stage == 1 else self.epochs // 2
            object.__setattr__(self, "swap_epoch", default)
        if not 0 <= self.swap_epoch <= self.epochs:
            raise ConfigurationError(
                f"swap_epoch must be in [0, epochs], got {self.swap_epoch}")
        if self.drop_prob is None:
            object.__setattr__(self, "drop_prob", DEFAULT_DROP_PROB[self.stage])
        if not 0.0 <= self.drop_prob <= 1.0:
            raise ConfigurationError(f"drop_prob must be in [0, 1], got {self.drop_prob}")
        if self.temporal_window < 1:
            raise ConfigurationError("temporal_window must be >= 1")
        if self.route not in ROUTES:
            raise ConfigurationError(f"route must be one of {ROUTES}, got {self.route!r}")


def phase_for(epoch: int, plan: TrainPlan) -> str:
    """Phase A before the swap, phase B from swap_epoch on."""
    if not 0 <= epoch < plan.epochs:
        raise ConfigurationError(f"epoch must be in [0, {plan.epochs}), got {epoch}")
    return "A" if epoch < plan.swap_epoch else "B"


def lr_for(component: str, epoch: int, plan: TrainPlan) -> float:
    """Learning rate of a component at an epoch under the two-phase swap.

    Phase A pairs the adapter with the faster rate and the denoiser with the
    slower one; phase B swaps them.
    """
    if component not in COMPONENTS:
        raise ConfigurationError(f"component must be one of {COMPONENTS}, got {component!r}")
    fast, slow = plan.lr_adapter, plan.lr_unet
    if phase_for(epoch, plan) == "A":
        return fast if component == "adapter" else slow
    return slow if component == "adapter" else fast


def plan_to_dict(plan: TrainPlan) -> dict:
    """Nested dict mirroring the config-file layout."""
    d = asdict(plan)
    return {
        "stage": d["stage"],
        "epochs": d["epochs"],
        "batch_size": d["batch_size"],
        "rates": {
            "adapter": d["lr_adapter"],
            "unet": d["lr_unet"],
            "encoder": d["lr_encoder"],
        },
        "swap_epoch": d["swap_epoch"],
        "drop_prob": d["drop_prob"],
        "temporal_window": d["temporal_window"],
        "route": d["route"],
        "freeze": d["freeze"],
        "seed": d["seed"],
    }


def plan_from_dict(data: dict) -> TrainPlan:
    try:
        rates = data.get("rates", {})
        freeze = data.get("freeze", {})
        kwargs = dict(
            stage=data["stage"],
            epochs=data["epochs"],
            freeze=FreezeFlags(**freeze),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed plan config: {exc}") from exc
    for key in ("batch_size", "swap_epoch", "drop_prob", "temporal_window", "route", "seed"):
        if key in data:
            kwargs[key] = data[key]
    for key, target in (("adapter", "lr_adapter"), ("unet", "lr_unet"),
                        ("encoder", "lr_encoder")):
        if key in rates:
            kwargs[target] = rates[key]
    unknown = set(data) - {"stage", "epochs", "batch_size", "rates", "swap_epoch",
                           "drop_prob", "temporal_window", "route", "freeze", "seed"}
    if unknown:
        raise ConfigurationError(f"unknown plan config keys: {sorted(unknown)}")
    return TrainPlan(**kwargs)


def save_plan(plan: TrainPlan, path) -> None:
    Path(path).write_text(yaml.safe_dump(plan_to_dict(plan), sort_keys=False))


def load_plan(path) -> TrainPlan:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"plan config not found: {path}")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict):
        raise ConfigurationError(f"plan config must be a mapping: {path}")
    return plan_from_dict(data)
