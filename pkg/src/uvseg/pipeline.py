"""End-to-end assembly: specialist -> prompts -> frozen generalist decoder.

Each prompt source can be switched off independently (box prompts, dense
mask prompt, the two pooled semantic embeddings, or the whole generalist),
which yields the ablation variants studied at configuration level.
"""

from dataclasses import dataclass, field, asdict

import torch
from torch import nn

from .errors import ConfigError
from .generalist import GeneralistConfig, TinyPromptable
from .nnutil import parameter_hash
from .prompting import (
    MlpMixer,
    PromptConfig,
    SemanticPooler,
    extract_boxes,
    mix_add,
)
from .specialist import SpecialistConfig, build_specialist


@dataclass
class AblationFlags:
    use_box: bool = True
    use_mask: bool = True
    use_gen_embedding: bool = True
    use_spec_embedding: bool = True
    use_generalist: bool = True


@dataclass
class PipelineConfig:
    specialist: SpecialistConfig = field(default_factory=SpecialistConfig)
    generalist: GeneralistConfig = field(default_factory=GeneralistConfig)
    prompt: PromptConfig = field(default_factory=PromptConfig)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    seed: int = 0

    @classmethod
    def tiny(cls, seed=0, **overrides):
        kwargs = dict(
            specialist=SpecialistConfig.tiny(),
            generalist=GeneralistConfig.tiny(),
            prompt=PromptConfig(min_area_px=16),
            seed=seed,
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    def to_dict(self):
        return asdict(self)


class SegmentationPipeline(nn.Module):
    """Trainable specialist + prompt path in front of a frozen generalist."""

    def __init__(self, cfg, generalist=None):
        super().__init__()
        self.cfg = cfg
        self.specialist = build_specialist(cfg.specialist, seed=cfg.seed)
        self.generalist = generalist if generalist is not None else TinyPromptable(
            cfg.generalist
        )
        d = cfg.generalist.prompt_dim
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed + 1)
            self.pool_spec = SemanticPooler(cfg.specialist.embed_dim, d)
            self.pool_gen = SemanticPooler(cfg.generalist.channels, d)
            self.mixer = MlpMixer(d) if cfg.prompt.mixer == "mlp" else None

    # --- structure ------------------------------------------------------

    def trainable_modules(self):
        mods = {"specialist": self.specialist}
        a = self.cfg.ablation
        if a.use_generalist:
            if a.use_spec_embedding:
                mods["pool_spec"] = self.pool_spec
            if a.use_gen_embedding:
                mods["pool_gen"] = self.pool_gen
            if self.mixer is not None:
                mods["mixer"] = self.mixer
        return mods

    def trainable_parameters(self):
        for m in self.trainable_modules().values():
            yield from m.parameters()

    def prompt_path(self):
        """The trainable prompt-side modules (pools + mixer head)."""
        mods = nn.ModuleDict()
        mods["pool_spec"] = self.pool_spec
        mods["pool_gen"] = self.pool_gen
        if self.mixer is not None:
            mods["mixer"] = self.mixer
        return mods

    def graph_signature(self):
        """Ordered names of the active computation stages; ablation flags
        must each produce a distinct signature."""
        a = self.cfg.ablation
        sig = ["specialist-coarse"]
        if not a.use_generalist:
            return tuple(sig + ["coarse-as-output"])
        if a.use_box:
            sig.append("box-prompts")
        if a.use_mask:
            sig.append(f"mask-prompt:{self.cfg.prompt.mask_prompt_mode}")
        if a.use_spec_embedding:
            sig.append("semantic:specialist")
        if a.use_gen_embedding:
            sig.append("semantic:generalist")
        sig.append(f"mixer:{self.cfg.prompt.mixer}:{self.cfg.prompt.placement}")
        sig.append("generalist-decode")
        return tuple(sig)

    def hashes(self):
        return {
            "generalist": parameter_hash(self.generalist),
            "specialist": parameter_hash(self.specialist),
            "prompt_path": parameter_hash(self.prompt_path()),
        }

    # --- forward ---------------------------------------------------------

    def forward(self, images):
        """images: B x 3 x H x W (normalized). Returns a dict with
        ``final_logits`` (B x H x W), ``coarse_logits`` (B x 2 x H x W) and
        per-sample box lists."""
        a = self.cfg.ablation
        p = self.cfg.prompt
        size = images.shape[-1]
        _, embedding, coarse_logits = self.specialist(images)
        coarse_diff = coarse_logits[:, 1] - coarse_logits[:, 0]

        out = {"coarse_logits": coarse_logits, "boxes": []}
        if not a.use_generalist:
            out["final_logits"] = coarse_diff
            return out

        img_feats = self.generalist.encode_image(images)
        finals = []
        for b in range(images.shape[0]):
            if a.use_box:
                with torch.no_grad():
                    binary = (
                        (coarse_logits[b, 1] > coarse_logits[b, 0])
                        .cpu()
                        .numpy()
                        .astype("uint8")
                    )
                boxes = extract_boxes(
                    binary, p.min_area_px, p.connectivity
                ).boxes
            else:
                boxes = []
            mask_logits = coarse_diff[b].unsqueeze(0) if a.use_mask else None
            sparse, dense = self.generalist.encode_prompts(
                boxes, size, mask_logits, p.mask_prompt_mode
            )
            seg_tok = (
                self.pool_spec(embedding[b]) if a.use_spec_embedding else None
            )
            gen_tok = (
                self.pool_gen(img_feats[b]) if a.use_gen_embedding else None
            )
            if self.mixer is not None:
                mixed = self.mixer(sparse.tokens, seg_tok, gen_tok, p.placement)
            else:
                mixed = mix_add(sparse.tokens, seg_tok, gen_tok, p.placement)
            finals.append(
                self.generalist.decode(img_feats[b], mixed.tokens, dense, size)
            )
            out["boxes"].append(boxes)
        out["final_logits"] = torch.stack(finals)
        return out


def build_pipeline(cfg, generalist=None):
    if cfg.prompt.mixer == "mlp" and cfg.generalist.prompt_dim <= 0:
        raise ConfigError("prompt_dim must be positive")
    return SegmentationPipeline(cfg, generalist=generalist)
