"""From specialist outputs to generalist prompts.

Boxes are derived from connected components of the coarse mask, pooled
embeddings become single semantic tokens, and a mixer fuses sparse prompt
tokens with the two semantic tokens, either by adding normalized features
or by concatenating them and projecting back down.
"""

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from . import maskops
from .errors import ConfigError

NORM_EPS = 1e-6


@dataclass
class PromptConfig:
    mixer: str = "add"  # "add" | "mlp"
    min_area_px: int = 100
    connectivity: int = 8
    placement: str = "broadcast"  # "broadcast" | "append"
    mask_prompt_mode: str = "dense"  # "dense" | "sparse"

    def __post_init__(self):
        if self.mixer not in ("add", "mlp"):
            raise ConfigError(f"mixer must be add or mlp, got {self.mixer!r}")
        if self.placement not in ("broadcast", "append"):
            raise ConfigError(f"unknown placement {self.placement!r}")
        if self.connectivity not in (4, 8):
            raise ConfigError("connectivity must be 4 or 8")
        if self.mask_prompt_mode not in ("dense", "sparse"):
            raise ConfigError(f"unknown mask_prompt_mode {self.mask_prompt_mode!r}")


@dataclass
class BoxSet:
    """Tight component boxes, half-open pixel intervals (x0, y0, x1, y1),
    sorted by (y0, x0)."""

    boxes: np.ndarray  # N x 4 int
    tile_id: str = ""

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.int64).reshape(-1, 4)

    def __len__(self):
        return len(self.boxes)


@dataclass
class MixedPrompt:
    tokens: torch.Tensor  # T' x D
    mixer: str


def extract_boxes(mask, min_area_px=100, connectivity=8, tile_id=""):
    """One tight box per connected component with area >= min_area_px.

    Accepts a binary array or a CoarseMask. Empty masks yield an empty set.
    """
    if hasattr(mask, "binary"):
        mask = mask.binary
    _, stats = maskops.component_stats(mask, connectivity)
    keep = stats.areas >= min_area_px
    bboxes = stats.bboxes[keep]
    # (y0, x0, y1, x1) -> (x0, y0, x1, y1)
    boxes = bboxes[:, [1, 0, 3, 2]]
    order = np.lexsort((boxes[:, 2], boxes[:, 3], boxes[:, 0], boxes[:, 1]))
    return BoxSet(boxes=boxes[order], tile_id=tile_id)


class SemanticPooler(nn.Module):
    """Global average pool over space followed by a learned projection,
    producing one prompt-dim token per image."""

    def __init__(self, in_channels, prompt_dim):
        super().__init__()
        self.proj = nn.Linear(in_channels, prompt_dim)

    @staticmethod
    def pool(features):
        # C x H x W or B x C x H x W -> (B,) C spatial mean
        return features.mean(dim=(-2, -1))

    def forward(self, features):
        return self.proj(self.pool(features))


def normalize_tokens(x):
    """Per-token normalization to zero mean / unit second moment (layer norm
    without affine); zero vectors stay zero through the epsilon guard."""
    mean = x.mean(dim=-1, keepdim=True)
    var = x.var(dim=-1, unbiased=False, keepdim=True)
    return (x - mean) / torch.sqrt(var + NORM_EPS)


def _check_dims(p_tokens, semantic_tokens):
    d = p_tokens.shape[-1]
    for tok in semantic_tokens:
        if tok is not None and tok.shape[-1] != d:
            raise ConfigError(
                f"semantic token dim {tok.shape[-1]} != prompt dim {d}"
            )


def mix_add(p_tokens, seg_token=None, gen_token=None, placement="broadcast"):
    """Sum of normalized features; semantic tokens broadcast onto every
    sparse token (or get appended when placement='append')."""
    _check_dims(p_tokens, (seg_token, gen_token))
    normed = normalize_tokens(p_tokens)
    extras = [
        normalize_tokens(t.reshape(1, -1))
        for t in (seg_token, gen_token)
        if t is not None
    ]
    if placement == "append":
        tokens = torch.cat([normed] + extras, dim=0) if extras else normed
    else:
        tokens = normed
        for e in extras:
            tokens = tokens + e
    return MixedPrompt(tokens=tokens, mixer="add")


class MlpMixer(nn.Module):
    """Concatenate normalized (sparse, specialist, generalist) features per
    token and project 3D -> D with a learned head."""

    def __init__(self, prompt_dim):
        super().__init__()
        self.prompt_dim = prompt_dim
        self.head = nn.Linear(3 * prompt_dim, prompt_dim)

    def forward(self, p_tokens, seg_token=None, gen_token=None, placement="broadcast"):
        _check_dims(p_tokens, (seg_token, gen_token))
        d = self.prompt_dim
        if p_tokens.shape[-1] != d:
            raise ConfigError(f"prompt dim {p_tokens.shape[-1]}, head expects {d}")
        normed = normalize_tokens(p_tokens)
        t = normed.shape[0]
        zero = p_tokens.new_zeros(1, d)
        seg = normalize_tokens(seg_token.reshape(1, -1)) if seg_token is not None else zero
        gen = normalize_tokens(gen_token.reshape(1, -1)) if gen_token is not None else zero
        blocks = torch.cat(
            [normed, seg.expand(t, d), gen.expand(t, d)], dim=-1
        )
        tokens = self.head(blocks)
        if placement == "append":
            extras = [e for e in (seg, gen) if e is not zero]
            if extras:
                tokens = torch.cat([tokens] + extras, dim=0)
        return MixedPrompt(tokens=tokens, mixer="mlp")
