"""The frozen promptable generalist segmenter.

Interface: a heavy image encoder, a prompt encoder turning boxes into
corner tokens and coarse-mask logits into a dense embedding, and a mask
decoder conditioned on both. All parameters stay frozen; gradients still
flow through the decoder into the prompt inputs so the specialist and the
mixer can be trained against the decoder's output.

``TinyPromptable`` is a small randomly-initialized frozen triple with the
same shape contracts, used in tests and desk-scale runs. Real pretrained
weights plug in through ``uvseg.pretrained.PretrainedPromptable``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import ConfigError, InvalidInputError
from .nnutil import freeze, parameter_hash, shape_manifest, tile_to_tensor


@dataclass
class GeneralistConfig:
    channels: int = 256  # image-embedding channels (C_g)
    downsample: int = 16  # tile -> embedding grid factor
    prompt_dim: int = 256
    decoder_channels: int = 64  # after upscaling
    seed: int = 0

    def __post_init__(self):
        if self.downsample & (self.downsample - 1):
            raise ConfigError("downsample must be a power of two")

    @classmethod
    def tiny(cls, **overrides):
        """Frozen stand-in sized for small test tiles. The fine grid keeps
        enough spatial detail in the dense prompt to overfit 64-pixel
        fixtures."""
        defaults = dict(channels=32, downsample=2, prompt_dim=32, decoder_channels=24)
        defaults.update(overrides)
        return cls(**defaults)

    def embedding_shape(self, tile_size):
        if tile_size % self.downsample:
            raise InvalidInputError(
                f"tile size {tile_size} not divisible by downsample {self.downsample}"
            )
        g = tile_size // self.downsample
        return (self.channels, g, g)


@dataclass
class ImageEmbedding:
    features: torch.Tensor  # C_g x H_g x W_g

    @property
    def grid(self):
        return tuple(self.features.shape[-2:])


@dataclass
class SparsePromptEmbedding:
    tokens: torch.Tensor  # T x D
    provenance: tuple = ()  # per-token: box-corner | mask-summary | sentinel

    def __post_init__(self):
        if self.tokens.ndim != 2:
            raise InvalidInputError("sparse prompt tokens must be TxD")
        if len(self.provenance) != self.tokens.shape[0]:
            raise InvalidInputError("one provenance tag per token")


@dataclass
class MaskLogits:
    logits: torch.Tensor  # H x W
    threshold: float = 0.0
    binary: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.binary is None:
            with torch.no_grad():
                self.binary = (
                    (self.logits > self.threshold).cpu().numpy().astype(np.uint8)
                )


class _FourierPosition(nn.Module):
    """Random Fourier features over normalized [0,1]^2 coordinates."""

    def __init__(self, dim):
        super().__init__()
        if dim % 2:
            raise ConfigError("prompt dim must be even for Fourier coordinates")
        self.register_buffer("freqs", torch.randn(2, dim // 2))

    def forward(self, coords):
        # coords: ... x 2 in [0, 1]
        proj = (2.0 * coords - 1.0) @ self.freqs * (2.0 * math.pi)
        return torch.cat([proj.sin(), proj.cos()], dim=-1)

    def grid(self, h, w):
        ys = (torch.arange(h, dtype=torch.float32) + 0.5) / h
        xs = (torch.arange(w, dtype=torch.float32) + 0.5) / w
        yy, xx = torch.meshgrid(ys, xs, indexing="ij")
        return self.forward(torch.stack([xx, yy], dim=-1)).permute(2, 0, 1)


class TinyPromptable(nn.Module):
    """Small frozen encoder / prompt-encoder / decoder triple.

    Shape contracts match the adapted full-scale model family: embedding at
    tile/downsample, two sparse tokens per box plus a sentinel when no box
    is given, dense mask embedding on the embedding grid, decoder output at
    tile resolution with gradients flowing to prompts only.
    """

    def __init__(self, cfg=None):
        super().__init__()
        cfg = cfg or GeneralistConfig.tiny()
        self.cfg = cfg
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            self._build(cfg)
        freeze(self)

    def _build(self, cfg):
        n_down = cfg.downsample.bit_length() - 1
        chans = [max(8, cfg.channels >> (n_down - 1 - i)) for i in range(n_down)]
        layers = []
        c_prev = 3
        for c in chans:
            layers += [
                nn.Conv2d(c_prev, c, 3, stride=2, padding=1),
                nn.GroupNorm(1, c),
                nn.GELU(),
            ]
            c_prev = c
        layers.append(nn.Conv2d(c_prev, cfg.channels, 1))
        self.image_encoder = nn.Sequential(*layers)

        d = cfg.prompt_dim
        self.position = _FourierPosition(d)
        self.corner_embed = nn.Parameter(torch.randn(2, d) * 0.5)
        self.no_box_embed = nn.Parameter(torch.randn(1, d) * 0.5)
        self.mask_embed = nn.Sequential(
            nn.Conv2d(1, cfg.channels // 2, 3, padding=1),
            nn.GELU(),
            nn.Conv2d(cfg.channels // 2, cfg.channels, 3, padding=1),
        )
        self.no_mask_embed = nn.Parameter(torch.randn(cfg.channels) * 0.5)
        self.mask_summary = nn.Linear(cfg.channels * 4, d)

        c, cd = cfg.channels, cfg.decoder_channels
        self.pe_project = nn.Conv2d(d, c, 1)
        self.fuse = nn.Sequential(
            nn.Conv2d(c, c, 3, padding=1), nn.GELU(), nn.GroupNorm(1, c),
            nn.Conv2d(c, c, 3, padding=1), nn.GELU(), nn.GroupNorm(1, c),
        )
        # the upscale path stays close to linear and phase-uniform (bilinear
        # resize instead of strided transposed convs) so the dense prompt
        # survives to the per-pixel readout in a frozen random net
        self.upscale = nn.Sequential(
            nn.Conv2d(c, cd * 2, 3, padding=1), nn.GELU(),
            nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
            nn.Conv2d(cd * 2, cd, 3, padding=1),
            nn.Upsample(scale_factor=2, mode="bilinear", align_corners=False),
        )
        self.token_mlp = nn.Sequential(
            nn.Linear(d, d), nn.GELU(), nn.Linear(d, cd),
        )
        # random-but-well-scaled: default conv init attenuates a frozen
        # stack badly, leaving the decoder insensitive to its prompts
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
                nn.init.orthogonal_(m.weight, gain=2.0)
                if m.bias is not None:
                    nn.init.zeros_(m.bias)

    # --- encoding -----------------------------------------------------

    def encode_image(self, images):
        """B x 3 x H x W -> B x C_g x H/ds x W/ds, gradient-free."""
        if images.shape[-1] % self.cfg.downsample:
            raise InvalidInputError(
                f"tile size {images.shape[-1]} not divisible by "
                f"downsample {self.cfg.downsample}"
            )
        with torch.no_grad():
            return self.image_encoder(images)

    def encode_prompts(self, boxes, tile_size, mask_logits=None, mask_mode="dense"):
        """Boxes and an optional coarse-logit map into (sparse, dense) prompts.

        boxes: N x 4 int array, half-open (x0, y0, x1, y1) pixel coords.
        mask_logits: 1 x h x w tensor (any resolution; resized internally).
        Returns (SparsePromptEmbedding, dense C_g x H_g x W_g tensor).
        """
        boxes = np.asarray(boxes, dtype=np.int64).reshape(-1, 4)
        if len(boxes):
            bad = (
                (boxes[:, 0] < 0) | (boxes[:, 1] < 0)
                | (boxes[:, 2] > tile_size) | (boxes[:, 3] > tile_size)
                | (boxes[:, 0] >= boxes[:, 2]) | (boxes[:, 1] >= boxes[:, 3])
            )
            if bad.any():
                raise InvalidInputError(
                    f"box out of bounds for tile size {tile_size}: "
                    f"{boxes[bad][0].tolist()}"
                )

        tokens = []
        tags = []
        dtype = self.corner_embed.dtype
        if len(boxes):
            corners = torch.from_numpy(
                boxes.reshape(-1, 2, 2).astype(np.float64) / tile_size
            ).to(dtype)
            pe = self.position(corners)  # N x 2 x D
            pe = pe + self.corner_embed.unsqueeze(0)
            tokens.append(pe.reshape(-1, self.cfg.prompt_dim))
            tags += ["box-corner"] * (2 * len(boxes))
        else:
            tokens.append(self.no_box_embed)
            tags.append("sentinel")

        grid = tile_size // self.cfg.downsample
        if mask_logits is None:
            dense = self.no_mask_embed.view(-1, 1, 1).expand(-1, grid, grid)
        else:
            m = mask_logits.to(dtype).unsqueeze(0)  # 1 x 1 x h x w
            m = F.interpolate(
                m, size=(grid, grid), mode="bilinear", align_corners=False
            )
            if mask_mode == "dense":
                dense = self.mask_embed(m).squeeze(0)
            elif mask_mode == "sparse":
                emb = self.mask_embed(m)
                pooled = F.adaptive_avg_pool2d(emb, 2).reshape(1, -1)
                tokens.append(self.mask_summary(pooled))
                tags.append("mask-summary")
                dense = self.no_mask_embed.view(-1, 1, 1).expand(-1, grid, grid)
            else:
                raise ConfigError(f"unknown mask_mode {mask_mode!r}")

        sparse = SparsePromptEmbedding(
            tokens=torch.cat(tokens, dim=0), provenance=tuple(tags)
        )
        return sparse, dense

    # --- decoding -----------------------------------------------------

    def decode(self, image_embedding, tokens, dense, out_size):
        """One mask-logit map at out_size x out_size.

        image_embedding: C_g x H_g x W_g; tokens: T x D; dense: like the
        embedding. Frozen weights, differentiable w.r.t. tokens and dense.
        """
        if tokens.shape[-1] != self.cfg.prompt_dim:
            raise ConfigError(
                f"prompt dim {tokens.shape[-1]} != decoder dim {self.cfg.prompt_dim}"
            )
        if image_embedding.shape[0] != self.cfg.channels:
            raise ConfigError(
                f"embedding channels {image_embedding.shape[0]} != "
                f"{self.cfg.channels}"
            )
        h, w = image_embedding.shape[-2:]
        pe = self.pe_project(self.position.grid(h, w).to(tokens.dtype).unsqueeze(0))
        ctx = self.fuse(image_embedding.unsqueeze(0) + pe)
        up = self.upscale(ctx + dense.unsqueeze(0))  # 1 x cd x 4h x 4w
        summary = F.layer_norm(tokens.mean(dim=0, keepdim=True), tokens.shape[-1:])
        query = self.token_mlp(summary)  # 1 x cd
        logits = torch.einsum("bchw,bc->bhw", up, query) / math.sqrt(
            self.cfg.decoder_channels
        )
        logits = F.interpolate(
            logits.unsqueeze(1), size=(out_size, out_size), mode="bilinear",
            align_corners=False,
        )
        return logits[0, 0]

    def manifest(self):
        return shape_manifest(self)

    def weight_hash(self):
        return parameter_hash(self)


# --- per-tile operation wrappers -------------------------------------------


def encode_image(tile, model):
    feats = model.encode_image(tile_to_tensor(tile).unsqueeze(0))
    return ImageEmbedding(features=feats.squeeze(0))


def encode_prompts(model, boxes, mask=None, tile_size=None, mask_mode="dense"):
    """BoxSet + optional CoarseMask into (sparse tokens, dense embedding).

    The coarse mask contributes its foreground-minus-background logit map,
    keeping the prompt differentiable with respect to the specialist.
    """
    if tile_size is None:
        if mask is None:
            raise InvalidInputError("tile_size required when no mask is given")
        tile_size = mask.logits.shape[-1]
    mask_logits = None
    if mask is not None:
        mask_logits = (mask.logits[1] - mask.logits[0]).unsqueeze(0)
    return model.encode_prompts(
        boxes.boxes if hasattr(boxes, "boxes") else boxes,
        tile_size,
        mask_logits,
        mask_mode,
    )


def decode_mask(model, image_embedding, prompt, dense=None, out_size=None):
    feats = image_embedding.features
    out_size = out_size or feats.shape[-1] * model.cfg.downsample
    tokens = prompt.tokens if hasattr(prompt, "tokens") else prompt
    if dense is None:
        grid = feats.shape[-1]
        dense = model.no_mask_embed.view(-1, 1, 1).expand(-1, grid, grid)
    logits = model.decode(feats, tokens, dense, out_size)
    return MaskLogits(logits=logits)
