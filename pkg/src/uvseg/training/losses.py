"""Training objective: focal + dice + mse on the generalist output, weighted
1:1:1, plus plain cross-entropy on the specialist's coarse logits, combined
as total = lambda * (focal + dice + mse) + ce."""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import InvalidInputError

PROB_EPS = 1e-7


@dataclass
class LossConfig:
    lam: float = 1.0  # weight of the generalist term
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    dice_smooth: float = 1.0
    # "mask": mse between predicted probabilities and the binary target.
    # "quality": mse between a predicted quality score and the realized IoU
    # (the adapted model family's original recipe); requires quality_pred.
    mse_target: str = "mask"

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidInputError("lambda must be non-negative")
        if self.focal_gamma < 0:
            raise InvalidInputError("focal_gamma must be >= 0")
        if not 0 < self.focal_alpha < 1:
            raise InvalidInputError("focal_alpha must be in (0, 1)")
        if self.dice_smooth <= 0:
            raise InvalidInputError("dice_smooth must be positive")
        if self.mse_target not in ("mask", "quality"):
            raise InvalidInputError(f"unknown mse_target {self.mse_target!r}")


def _pair(probs, gt):
    probs = torch.as_tensor(probs)
    gt = torch.as_tensor(gt)
    if probs.shape != gt.shape:
        raise InvalidInputError(
            f"shape mismatch: probs {tuple(probs.shape)} vs gt {tuple(gt.shape)}"
        )
    return probs, gt.to(probs.dtype)


def focal_loss(probs, gt, gamma=2.0, alpha=0.25):
    """Mean over pixels of -alpha * (1 - p_t)^gamma * log(p_t), where p_t is
    the predicted probability of the true class. With gamma = 0 this is
    alpha-weighted binary cross-entropy."""
    probs, gt = _pair(probs, gt)
    p_t = probs * gt + (1 - probs) * (1 - gt)
    p_t = p_t.clamp(PROB_EPS, 1 - PROB_EPS)
    return (-alpha * (1 - p_t) ** gamma * p_t.log()).mean()


def dice_loss(probs, gt, smooth=1.0):
    """1 - (2 * sum(p*g) + smooth) / (sum(p) + sum(g) + smooth), in [0, 1]."""
    probs, gt = _pair(probs, gt)
    inter = (probs * gt).sum()
    return 1 - (2 * inter + smooth) / (probs.sum() + gt.sum() + smooth)


def mse_loss(probs, gt):
    probs, gt = _pair(probs, gt)
    return ((probs - gt) ** 2).mean()


def cross_entropy_loss(logits, gt):
    """Two-class cross-entropy on the coarse logits (mean over pixels)."""
    logits = torch.as_tensor(logits)
    gt = torch.as_tensor(gt)
    if logits.ndim == 3:
        logits = logits.unsqueeze(0)
        gt = gt.unsqueeze(0)
    if logits.shape[1] != 2 or logits.shape[-2:] != gt.shape[-2:]:
        raise InvalidInputError(
            f"coarse logits {tuple(logits.shape)} do not match gt {tuple(gt.shape)}"
        )
    return F.cross_entropy(logits, gt.long())


def soft_iou(probs, gt, threshold=0.5):
    """Hard IoU of thresholded probabilities; the quality-regression target."""
    probs, gt = _pair(probs, gt)
    pred = probs > threshold
    g = gt > 0.5
    union = (pred | g).sum()
    if union == 0:
        return torch.ones((), dtype=probs.dtype)
    return (pred & g).sum().to(probs.dtype) / union.to(probs.dtype)


def total_loss(sam_probs, coarse_logits, gt, cfg, quality_pred=None):
    """Composite objective; returns (total, per-term breakdown dict)."""
    terms = {}
    terms["focal"] = focal_loss(sam_probs, gt, cfg.focal_gamma, cfg.focal_alpha)
    terms["dice"] = dice_loss(sam_probs, gt, cfg.dice_smooth)
    if cfg.mse_target == "quality":
        if quality_pred is None:
            raise InvalidInputError(
                "mse_target='quality' requires a predicted quality score"
            )
        target = soft_iou(sam_probs, gt).detach()
        terms["mse"] = mse_loss(
            torch.as_tensor(quality_pred).reshape(()), target
        )
    else:
        terms["mse"] = mse_loss(sam_probs, gt)
    terms["l_sam"] = terms["focal"] + terms["dice"] + terms["mse"]
    terms["ce"] = cross_entropy_loss(coarse_logits, gt)
    total = cfg.lam * terms["l_sam"] + terms["ce"]
    terms["total"] = total
    return total, terms
