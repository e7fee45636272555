"""Freeze-aware training loop with cosine learning-rate decay.

Only the specialist and the prompt path receive optimizer updates; the
generalist stays frozen (its parameter hash is asserted unchanged), while
gradients still flow through its decoder into the prompt inputs.
"""

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch.optim.lr_scheduler import CosineAnnealingLR

from ..errors import (
    ArtifactMismatchError,
    InvalidInputError,
    TrainingDivergedError,
)
from ..nnutil import parameter_hash, shape_manifest, tiles_to_batch
from ..pipeline import PipelineConfig, SegmentationPipeline
from ..configio import build_dataclass
from .losses import LossConfig, total_loss

CHECKPOINT_FORMAT = 1

HISTORY_FIELDS = (
    "epoch", "lr", "focal", "dice", "mse", "l_sam", "ce", "total", "val_iou",
)


@dataclass
class TrainConfig:
    lr: float = 5e-4
    weight_decay: float = 1e-3
    batch_size: int = 4
    epochs: int = 100
    seed: int = 0
    schedule: str = "cosine"

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.lr <= 0 or self.weight_decay < 0:
            raise InvalidInputError("lr must be positive, weight_decay >= 0")
        if self.schedule not in ("cosine", "constant"):
            raise InvalidInputError(f"unknown schedule {self.schedule!r}")


@dataclass
class FitResult:
    best_val_iou: float
    best_epoch: int
    history: list
    lr_trace: list
    checkpoint_path: str | None = None
    best_state: dict = field(default_factory=dict, repr=False)


def _batch_tensors(pairs, dtype=torch.float32):
    tiles, labels = zip(*pairs)
    images = tiles_to_batch(tiles, dtype)
    gts = torch.stack(
        [torch.from_numpy(l.mask.astype(np.float32)).to(dtype) for l in labels]
    )
    return images, gts


def train_step(pipeline, images, gts, optimizer, loss_cfg):
    """One optimizer step; raises TrainingDivergedError on non-finite loss."""
    out = pipeline(images)
    probs = torch.sigmoid(out["final_logits"])
    total, terms = total_loss(probs, out["coarse_logits"], gts, loss_cfg)
    record = {k: float(v.detach()) for k, v in terms.items()}
    if not math.isfinite(record["total"]):
        record["boxes"] = [len(b) for b in out["boxes"]]
        raise TrainingDivergedError("non-finite training loss", record)
    optimizer.zero_grad()
    total.backward()
    optimizer.step()
    return record


@torch.no_grad()
def evaluate_iou(pipeline, pairs, batch_size=4):
    """Micro-averaged IoU of the pipeline's binarized output over pairs."""
    inter = 0
    union = 0
    for i in range(0, len(pairs), batch_size):
        images, gts = _batch_tensors([pairs[j] for j in range(i, min(i + batch_size, len(pairs)))])
        out = pipeline(images)
        pred = out["final_logits"] > 0
        gt = gts > 0.5
        inter += int((pred & gt).sum())
        union += int((pred | gt).sum())
    return 1.0 if union == 0 else inter / union


def fit(pipeline, train_pairs, val_pairs, train_cfg, loss_cfg, out_dir=None):
    """Train the pipeline; select the best checkpoint by validation IoU.

    Writes ``history.csv`` and ``best.ckpt`` under out_dir when given.
    """
    if len(train_pairs) == 0:
        raise InvalidInputError("training set is empty")
    torch.manual_seed(train_cfg.seed)
    rng = np.random.default_rng(train_cfg.seed)

    params = list(pipeline.trainable_parameters())
    optimizer = torch.optim.Adam(
        params, lr=train_cfg.lr, weight_decay=train_cfg.weight_decay
    )
    steps_per_epoch = math.ceil(len(train_pairs) / train_cfg.batch_size)
    total_steps = steps_per_epoch * train_cfg.epochs
    scheduler = None
    if train_cfg.schedule == "cosine":
        scheduler = CosineAnnealingLR(optimizer, T_max=total_steps, eta_min=0.0)

    frozen_before = parameter_hash(pipeline.generalist)
    history = []
    lr_trace = []
    best = FitResult(best_val_iou=-1.0, best_epoch=-1, history=history, lr_trace=lr_trace)

    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(train_pairs))
        epoch_terms = []
        epoch_lr = optimizer.param_groups[0]["lr"]
        for s in range(steps_per_epoch):
            idx = order[s * train_cfg.batch_size : (s + 1) * train_cfg.batch_size]
            images, gts = _batch_tensors([train_pairs[i] for i in idx])
            lr_trace.append(optimizer.param_groups[0]["lr"])
            epoch_terms.append(
                train_step(pipeline, images, gts, optimizer, loss_cfg)
            )
            if scheduler is not None:
                scheduler.step()
        val_iou = evaluate_iou(pipeline, val_pairs, train_cfg.batch_size)
        row = {"epoch": epoch, "lr": epoch_lr, "val_iou": val_iou}
        for key in ("focal", "dice", "mse", "l_sam", "ce", "total"):
            row[key] = float(np.mean([t[key] for t in epoch_terms]))
        history.append(row)
        if val_iou > best.best_val_iou:
            best.best_val_iou = val_iou
            best.best_epoch = epoch
            best.best_state = {
                name: {k: v.detach().clone() for k, v in mod.state_dict().items()}
                for name, mod in _stateful_modules(pipeline).items()
            }

    frozen_after = parameter_hash(pipeline.generalist)
    if frozen_after != frozen_before:
        raise ArtifactMismatchError("generalist parameters changed during training")

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_history(out_dir / "history.csv", history)
        best.checkpoint_path = str(out_dir / "best.ckpt")
        save_checkpoint(
            best.checkpoint_path, pipeline, train_cfg, loss_cfg,
            state=best.best_state,
            extra={"best_val_iou": best.best_val_iou, "best_epoch": best.best_epoch},
        )
    return best


def _stateful_modules(pipeline):
    mods = {"specialist": pipeline.specialist, "pool_spec": pipeline.pool_spec,
            "pool_gen": pipeline.pool_gen}
    if pipeline.mixer is not None:
        mods["mixer"] = pipeline.mixer
    return mods


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in HISTORY_FIELDS})


def save_checkpoint(path, pipeline, train_cfg, loss_cfg, state=None, extra=None):
    """Serialized-array container: per-module state dicts plus a manifest of
    parameter names/shapes, the configs, and the seed."""
    state = state or {
        name: mod.state_dict() for name, mod in _stateful_modules(pipeline).items()
    }
    payload = {
        "format_version": CHECKPOINT_FORMAT,
        "pipeline_config": pipeline.cfg.to_dict(),
        "train_config": asdict(train_cfg),
        "loss_config": asdict(loss_cfg),
        "seed": train_cfg.seed,
        "state": state,
        "manifest": {
            name: {k: tuple(v.shape) for k, v in mod_state.items()}
            for name, mod_state in state.items()
        },
        "generalist_hash": parameter_hash(pipeline.generalist),
        "generalist_manifest": shape_manifest(pipeline.generalist),
        "extra": extra or {},
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path, generalist=None):
    """Rebuild a pipeline from a checkpoint; shape or hash mismatches raise
    ArtifactMismatchError."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ArtifactMismatchError(f"cannot read checkpoint {path}: {exc}")
    if payload.get("format_version") != CHECKPOINT_FORMAT:
        raise ArtifactMismatchError(
            f"unsupported checkpoint format {payload.get('format_version')!r}"
        )
    cfg = build_dataclass(PipelineConfig, payload["pipeline_config"])
    pipeline = SegmentationPipeline(cfg, generalist=generalist)
    try:
        for name, mod in _stateful_modules(pipeline).items():
            if name in payload["state"]:
                mod.load_state_dict(payload["state"][name])
    except RuntimeError as exc:
        raise ArtifactMismatchError(f"checkpoint does not fit config: {exc}")
    if generalist is None:
        got = parameter_hash(pipeline.generalist)
        if got != payload["generalist_hash"]:
            raise ArtifactMismatchError(
                "reconstructed generalist hash differs from checkpoint"
            )
    return pipeline, payload
