"""Loss, optimizer, and training/adaptation loops for the acoustic model."""

from .losses import LossBreakdown, composite_loss, torch_ssim
from .loop import (
    AdaptConfig,
    TrainConfig,
    adapt,
    expand_speaker_table,
    load_checkpoint,
    load_features,
    make_batches,
    save_checkpoint,
    save_features,
    train,
)
from .ranger import OptimizerConfig, Ranger, lr_at

__all__ = [
    "AdaptConfig",
    "LossBreakdown",
    "OptimizerConfig",
    "Ranger",
    "TrainConfig",
    "adapt",
    "composite_loss",
    "expand_speaker_table",
    "load_checkpoint",
    "load_features",
    "lr_at",
    "make_batches",
    "save_checkpoint",
    "save_features",
    "torch_ssim",
    "train",
]
