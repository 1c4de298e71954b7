"""Two-stage training: plans, learning-rate schedule, checkpoints, loops."""

from .checkpoint import TrainState, load_checkpoint, save_checkpoint
from .loop import (
    DEFAULT_T,
    checkpoint_name,
    models_from_checkpoint,
    run_stage1,
    run_stage2,
)
from .plan import (
    FreezeFlags,
    TrainPlan,
    load_plan,
    lr_for,
    phase_for,
    plan_from_dict,
    plan_to_dict,
    save_plan,
)

__all__ = [
    "DEFAULT_T",
    "FreezeFlags",
    "TrainPlan",
    "TrainState",
    "checkpoint_name",
    "load_checkpoint",
    "load_plan",
    "lr_for",
    "models_from_checkpoint",
    "phase_for",
    "plan_from_dict",
    "plan_to_dict",
    "run_stage1",
    "run_stage2",
    "save_checkpoint",
    "save_plan",
]
