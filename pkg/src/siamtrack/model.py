"""Full network: backbone, per-level box adaptive heads, adaptive fusion."""

from __future__ import annotations

import pickle
from dataclasses import dataclass, asdict

import torch
import torch.nn as nn

from .backbone import build_backbone
from .geometry import GridSpec
from .heads import BoxAdaptiveHead, FusionWeights, fuse_levels

TEMPLATE_SIZE = 127
SEARCH_SIZE = 255
STRIDE = 8
SCORE_SIZE = 25
TEMPLATE_FEAT_SIZE = 7


@dataclass(frozen=True)
class BackboneConfig:
    variant: str = "tiny"
    levels: tuple = ("l3", "l4", "l5")
    reduced_channels: int = 32
    tiny_width: int = 32

    def __post_init__(self):
        if self.variant not in ("tiny", "resnet50_atrous"):
            raise ValueError(f"unknown backbone variant {self.variant!r}")
        bad = [l for l in self.levels if l not in ("l3", "l4", "l5")]
        if bad or not self.levels:
            raise ValueError(f"invalid level set {self.levels}")


def canonical_grid():
    return GridSpec(w=SCORE_SIZE, h=SCORE_SIZE, s=STRIDE,
                    im_w=SEARCH_SIZE, im_h=SEARCH_SIZE)


class SiamTrackNet(nn.Module):
    """Siamese tracker network.

    Template and search patches go through one shared backbone; a per-level
    1x1 reduction equalizes channels, the template path keeps only the
    center 7x7 region, and per-level heads correlate and predict. Per-level
    maps are fused by learnable convex weights.
    """

    def __init__(self, cfg: BackboneConfig = BackboneConfig()):
        super().__init__()
        self.cfg = cfg
        self.backbone = build_backbone(cfg.variant, cfg.levels, cfg.tiny_width)
        self.reduce = nn.ModuleDict()
        for level, chans in self.backbone.out_channels.items():
            self.reduce[level] = nn.Sequential(
                nn.Conv2d(chans, cfg.reduced_channels, 1, bias=False),
                nn.BatchNorm2d(cfg.reduced_channels),
            )
        self.heads = nn.ModuleDict(
            {level: BoxAdaptiveHead(cfg.reduced_channels) for level in cfg.levels})
        self.fusion = FusionWeights(cfg.levels)

    def extract_features(self, patch, role):
        """Per-level features for a template (7x7) or search (31x31) patch."""
        expected = TEMPLATE_SIZE if role == "template" else SEARCH_SIZE
        if patch.dim() != 4 or patch.shape[-2:] != (expected, expected):
            raise ValueError(
                f"{role} patch must be (B, 3, {expected}, {expected}), "
                f"got {tuple(patch.shape)}")
        feats = {}
        for level, raw in self.backbone(patch).items():
            f = self.reduce[level](raw)
            if role == "template":
                c = f.size(-1) // 2
                r = TEMPLATE_FEAT_SIZE // 2
                f = f[..., c - r:c + r + 1, c - r:c + r + 1]
            feats[level] = f
        return feats

    def head_forward(self, tmpl_feats, srch_feats, level):
        if level not in self.heads:
            raise ValueError(f"level {level!r} not emitted by this model")
        return self.heads[level](tmpl_feats[level], srch_feats[level])

    def forward(self, template, search):
        """Fused (cls, reg) maps for a batch of template/search patches."""
        tmpl = self.extract_features(template, "template")
        srch = self.extract_features(search, "search")
        outputs = {level: self.head_forward(tmpl, srch, level)
                   for level in self.cfg.levels}
        return fuse_levels(outputs, self.fusion)

    def forward_cached(self, tmpl_feats, search):
        """Fused maps from cached template features (inference path)."""
        srch = self.extract_features(search, "search")
        outputs = {level: self.head_forward(tmpl_feats, srch, level)
                   for level in self.cfg.levels}
        return fuse_levels(outputs, self.fusion)


def save_checkpoint(model: SiamTrackNet, path, extra=None):
    payload = {
        "config": asdict(model.cfg),
        "state": model.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path):
    """Rebuild a model from a checkpoint; forward outputs round-trip exactly."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
        cfg_dict = dict(payload["config"])
        cfg_dict["levels"] = tuple(cfg_dict["levels"])
        model = SiamTrackNet(BackboneConfig(**cfg_dict))
        model.load_state_dict(payload["state"])
    except (RuntimeError, KeyError, TypeError, EOFError,
            pickle.UnpicklingError) as e:
        raise ValueError(f"cannot load checkpoint {path}: {e}") from e
    model.eval()
    return model, payload.get("extra", {})
