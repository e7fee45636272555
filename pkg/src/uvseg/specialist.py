"""The trainable specialist segmenter.

A hierarchical multi-scale encoder produces a feature pyramid, a per-pixel
MLP fuses the levels into one aggregated embedding, and a classification
head turns that embedding into a two-channel coarse urban-village mask.

The built-in ``TinyHierEncoder`` is a few-channel stand-in with the same
shape contract as pretrained hierarchical-transformer backbones; real
weights plug in through the backbone registry (see ``uvseg.pretrained``).
"""

from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, InvalidInputError
from .nnutil import tile_to_tensor


@dataclass
class SpecialistConfig:
    backbone: str = "tiny"
    channels: tuple = (8, 16, 24, 32)
    strides: tuple = (4, 8, 16, 32)
    embed_dim: int = 32
    # aggregation resolution: tile_size / agg_stride. The default matches the
    # coarsest-but-one pyramid level, which also matches the generalist's
    # embedding grid at full scale.
    agg_stride: int = 16
    seed: int = 0

    def __post_init__(self):
        if len(self.channels) != len(self.strides):
            raise ConfigError("channels and strides must have equal length")
        if list(self.strides) != sorted(set(self.strides)):
            raise ConfigError("strides must be strictly increasing")

    @classmethod
    def tiny(cls, **overrides):
        """Desk-scale preset for small tiles (aggregates at stride 4)."""
        defaults = dict(channels=(8, 12, 16, 24), embed_dim=24, agg_stride=4)
        defaults.update(overrides)
        return cls(**defaults)


@dataclass
class FeaturePyramid:
    levels: list  # per-stage C_i x H_i x W_i tensors, finest first
    strides: tuple

    def __post_init__(self):
        if len(self.levels) != len(self.strides):
            raise InvalidInputError("one stride per pyramid level")


@dataclass
class AggregatedEmbedding:
    features: torch.Tensor  # D x Ha x Wa


@dataclass
class CoarseMask:
    """Two-channel logits at tile resolution plus the binarization.

    Ties in the argmax break to background, so foreground requires a
    strictly larger logit.
    """

    logits: torch.Tensor  # 2 x H x W
    binary: np.ndarray = field(default=None)
    threshold_policy: str = "argmax-ties-to-background"

    def __post_init__(self):
        if self.binary is None:
            with torch.no_grad():
                fg = (self.logits[1] > self.logits[0]).cpu().numpy()
            self.binary = fg.astype(np.uint8)


class _HierStage(nn.Module):
    def __init__(self, c_in, c_out, down):
        super().__init__()
        self.patch = nn.Conv2d(c_in, c_out, kernel_size=down, stride=down)
        self.norm = nn.GroupNorm(1, c_out)
        self.mix = nn.Conv2d(c_out, c_out, 3, padding=1)

    def forward(self, x):
        x = self.norm(self.patch(x))
        return x + self.mix(F.gelu(x))


class TinyHierEncoder(nn.Module):
    """4-stage hierarchical encoder; stage i output is tile_size/strides[i]."""

    def __init__(self, cfg):
        super().__init__()
        self.strides = tuple(cfg.strides)
        self.channels = tuple(cfg.channels)
        downs = []
        prev = 1
        for s in cfg.strides:
            if s % prev:
                raise ConfigError(f"stride {s} not a multiple of previous {prev}")
            downs.append(s // prev)
            prev = s
        c_prev = 3
        stages = []
        for c, d in zip(cfg.channels, downs):
            stages.append(_HierStage(c_prev, c, d))
            c_prev = c
        self.stages = nn.ModuleList(stages)

    def forward(self, x):
        out = []
        for stage in self.stages:
            x = stage(x)
            out.append(x)
        return out


BACKBONES = {"tiny": TinyHierEncoder}


def register_backbone(name, factory):
    BACKBONES[name] = factory


class FeatureAggregator(nn.Module):
    """Per-pixel MLP fusion of all pyramid levels at one resolution."""

    def __init__(self, channels, embed_dim):
        super().__init__()
        self.proj = nn.ModuleList(nn.Conv2d(c, embed_dim, 1) for c in channels)
        self.fuse = nn.Conv2d(embed_dim * len(channels), embed_dim, 1)

    def forward(self, levels, out_hw):
        if len(levels) != len(self.proj):
            raise ConfigError(
                f"aggregator built for {len(self.proj)} levels, got {len(levels)}"
            )
        resized = [
            F.interpolate(
                proj(lv), size=out_hw, mode="bilinear", align_corners=False
            )
            for proj, lv in zip(self.proj, levels)
        ]
        return self.fuse(torch.cat(resized, dim=1))


class Specialist(nn.Module):
    """Backbone + aggregation + coarse classification head."""

    def __init__(self, cfg):
        super().__init__()
        if cfg.backbone not in BACKBONES:
            raise ConfigError(
                f"unknown backbone {cfg.backbone!r}; registered: {sorted(BACKBONES)}"
            )
        self.cfg = cfg
        self.encoder = BACKBONES[cfg.backbone](cfg)
        self.aggregator = FeatureAggregator(self.encoder.channels, cfg.embed_dim)
        self.head = nn.Conv2d(cfg.embed_dim, 2, 1)

    def check_input(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise InvalidInputError(f"expected Bx3xHxW input, got {tuple(x.shape)}")
        size = x.shape[-1]
        if x.shape[-2] != size:
            raise InvalidInputError("tiles must be square")
        if size % max(self.cfg.strides):
            raise InvalidInputError(
                f"tile size {size} not divisible by max stride {max(self.cfg.strides)}"
            )

    def forward(self, x):
        """Returns (pyramid levels, aggregated embedding, full-res logits)."""
        self.check_input(x)
        size = x.shape[-1]
        levels = self.encoder(x)
        agg_hw = (size // self.cfg.agg_stride, size // self.cfg.agg_stride)
        embedding = self.aggregator(levels, agg_hw)
        logits = F.interpolate(
            self.head(embedding), size=(size, size), mode="bilinear",
            align_corners=False,
        )
        return levels, embedding, logits


def build_specialist(cfg, seed=None):
    """Construct a specialist with seed-controlled initialization."""
    g = torch.Generator().manual_seed(cfg.seed if seed is None else seed)
    with torch.random.fork_rng():
        torch.manual_seed(int(torch.randint(0, 2**31 - 1, (1,), generator=g)))
        return Specialist(cfg)


# --- per-tile operation wrappers -------------------------------------------


def encode_pyramid(tile, model):
    """Run the hierarchical encoder on one tile."""
    model.check_input(tile_to_tensor(tile).unsqueeze(0))
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            levels = model.encoder(tile_to_tensor(tile).unsqueeze(0))
    finally:
        model.train(was_training)
    return FeaturePyramid(
        [lv.squeeze(0) for lv in levels], tuple(model.cfg.strides)
    )


def aggregate_features(pyramid, model, tile_size=None):
    """Fuse a pyramid into one embedding at the configured resolution."""
    size = tile_size or pyramid.levels[0].shape[-1] * pyramid.strides[0]
    hw = (size // model.cfg.agg_stride, size // model.cfg.agg_stride)
    feats = model.aggregator([lv.unsqueeze(0) for lv in pyramid.levels], hw)
    return AggregatedEmbedding(feats.squeeze(0))


def predict_coarse(embedding, model, tile_size):
    """Classify the embedding and upsample logits to tile resolution."""
    logits = model.head(embedding.features.unsqueeze(0))
    logits = F.interpolate(
        logits, size=(tile_size, tile_size), mode="bilinear", align_corners=False
    )
    return CoarseMask(logits=logits.squeeze(0))
