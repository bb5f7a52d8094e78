"""Classification cross-entropy, IoU regression loss, multi-task objective."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .geometry import Box, GridSpec, grid_points
from .labels import POSITIVE, SampleSelection


@dataclass(frozen=True)
class LossConfig:
    lambda_cls: float = 1.0
    lambda_reg: float = 1.0

    def __post_init__(self):
        if self.lambda_cls < 0 or self.lambda_reg < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class LossReport:
    cls_loss: float
    reg_loss: float
    total: float
    num_pos: int
    num_neg: int

    def to_json_dict(self):
        return {"cls_loss": self.cls_loss, "reg_loss": self.reg_loss,
                "total": self.total, "num_pos": self.num_pos,
                "num_neg": self.num_neg}


def classification_loss(cls_map, labels, sel: SampleSelection):
    """Softmax cross-entropy over selected cells only.

    cls_map: (2, h, w) logits tensor; positives target class 1, negatives 0.
    """
    idx = torch.cat([torch.as_tensor(sel.pos, dtype=torch.long),
                     torch.as_tensor(sel.neg, dtype=torch.long)])
    if idx.numel() == 0:
        raise ValueError("empty sample selection")
    logits = cls_map.reshape(2, -1).t()[idx]
    targets = torch.cat([torch.ones(len(sel.pos), dtype=torch.long),
                         torch.zeros(len(sel.neg), dtype=torch.long)])
    return F.cross_entropy(logits, targets)


def iou_loss(reg_map, gt: Box, positives, spec: GridSpec):
    """Mean of 1 - IoU between decoded boxes at positive cells and gt.

    reg_map: (4, h, w) strictly positive side distances (l, t, r, b).
    """
    positives = torch.as_tensor(positives, dtype=torch.long)
    if positives.numel() == 0:
        raise ValueError("no positive cells for regression")
    px, py = grid_points(spec)
    px = torch.from_numpy(px).reshape(-1)[positives].to(reg_map.dtype)
    py = torch.from_numpy(py).reshape(-1)[positives].to(reg_map.dtype)
    d = reg_map.reshape(4, -1)[:, positives]
    x1, y1 = px - d[0], py - d[1]
    x2, y2 = px + d[2], py + d[3]
    iw = torch.clamp(torch.clamp(x2, max=gt.x2) - torch.clamp(x1, min=gt.x1), min=0)
    ih = torch.clamp(torch.clamp(y2, max=gt.y2) - torch.clamp(y1, min=gt.y1), min=0)
    inter = iw * ih
    union = (x2 - x1) * (y2 - y1) + gt.width * gt.height - inter
    return (1.0 - inter / union).mean()


def total_loss(cls_map, reg_map, labels, sel: SampleSelection, gt: Box,
               spec: GridSpec, cfg: LossConfig = LossConfig()):
    """Weighted multi-task loss; returns (scalar tensor, LossReport)."""
    cls = classification_loss(cls_map, labels, sel)
    reg = iou_loss(reg_map, gt, sel.pos, spec)
    total = cfg.lambda_cls * cls + cfg.lambda_reg * reg
    report = LossReport(cls_loss=float(cls.detach()), reg_loss=float(reg.detach()),
                        total=float(total.detach()), num_pos=len(sel.pos),
                        num_neg=len(sel.neg))
    return total, report
