from .schedule import TrainSchedule, lr_at
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .pretrain import LossTrace, TrainingDivergedError, pretrain
from .finetune import finetune

__all__ = [
    "TrainSchedule",
    "lr_at",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "LossTrace",
    "TrainingDivergedError",
    "pretrain",
    "finetune",
]
