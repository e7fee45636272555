"""Exhaustive grid search over (learning rate, weight decay, lambda)."""

import dataclasses
import itertools
from dataclasses import dataclass, field

from ..errors import InvalidInputError


@dataclass
class GridSearchSpace:
    lr_grid: list = field(default_factory=lambda: [5e-3, 5e-4, 5e-5])
    wd_grid: list = field(default_factory=lambda: [1e-2, 1e-3])
    lambda_grid: list = field(default_factory=lambda: [0.1, 1.0, 10.0])

    def __post_init__(self):
        if not (self.lr_grid and self.wd_grid and self.lambda_grid):
            raise InvalidInputError("grid lists must be non-empty")

    def combinations(self):
        return list(itertools.product(self.lr_grid, self.wd_grid, self.lambda_grid))


def grid_search(space, train_cfg, loss_cfg, runner):
    """Run every (lr, wd, lambda) combination through ``runner`` and rank.

    runner(train_cfg, loss_cfg) -> validation IoU. A failing trial is
    recorded with its error and ranked last; the sweep continues. Returns
    rows sorted by val IoU descending (ties keep trial order).
    """
    rows = []
    for trial, (lr, wd, lam) in enumerate(space.combinations()):
        t_cfg = dataclasses.replace(train_cfg, lr=lr, weight_decay=wd)
        l_cfg = dataclasses.replace(loss_cfg, lam=lam)
        row = {
            "trial": trial, "lr": lr, "weight_decay": wd, "lambda": lam,
            "val_iou": None, "status": "ok", "error": "",
        }
        try:
            row["val_iou"] = float(runner(t_cfg, l_cfg))
        except Exception as exc:  # contain per-trial failures
            row["status"] = "failed"
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return sorted(
        rows,
        key=lambda r: (
            r["status"] != "ok",
            -(r["val_iou"] if r["val_iou"] is not None else float("-inf")),
            r["trial"],
        ),
    )
