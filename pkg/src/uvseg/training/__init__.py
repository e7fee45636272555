from .grid import GridSearchSpace, grid_search
from .loop import (
    FitResult,
    TrainConfig,
    evaluate_iou,
    fit,
    load_checkpoint,
    save_checkpoint,
    train_step,
    write_history,
)
from .losses import (
    LossConfig,
    cross_entropy_loss,
    dice_loss,
    focal_loss,
    mse_loss,
    total_loss,
)

__all__ = [
    "FitResult",
    "GridSearchSpace",
    "LossConfig",
    "TrainConfig",
    "cross_entropy_loss",
    "dice_loss",
    "evaluate_iou",
    "fit",
    "focal_loss",
    "grid_search",
    "load_checkpoint",
    "mse_loss",
    "save_checkpoint",
    "total_loss",
    "train_step",
    "write_history",
]
