"""Toy-scale map+radio fusion trainer consuming rfmap JSON-lines exports."""

__version__ = "0.1.0"

from .data import FusionDataset, load_records
from .model import FusionModel, ModelConfig, dice_loss, unpatch
from .schedule import warmup_cosine_lr
from .train import TrainConfig, predict, train

__all__ = [
    "FusionDataset",
    "FusionModel",
    "ModelConfig",
    "TrainConfig",
    "dice_loss",
    "load_records",
    "predict",
    "train",
    "unpatch",
    "warmup_cosine_lr",
]
