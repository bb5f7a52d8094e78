"""Depth-wise cross-correlation and the box adaptive head."""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def xcorr_depthwise(x, kernel):
    """Depthwise cross correlation: each channel of x valid-correlated with
    the matching channel of kernel, no cross-channel mixing.

    x: (B, C, S, S) search features, kernel: (B, C, K, K) template features.
    """
    if x.size(1) != kernel.size(1):
        raise ValueError(
            f"channel mismatch: search {x.size(1)} vs kernel {kernel.size(1)}")
    if kernel.size(2) > x.size(2) or kernel.size(3) > x.size(3):
        raise ValueError("kernel larger than search features")
    batch, channel = kernel.size(0), kernel.size(1)
    x = x.reshape(1, batch * channel, x.size(2), x.size(3))
    kernel = kernel.reshape(batch * channel, 1, kernel.size(2), kernel.size(3))
    out = F.conv2d(x, kernel, groups=batch * channel)
    return out.reshape(batch, channel, out.size(2), out.size(3))


class _Adjust(nn.Module):
    """1x1 conv + BN adjusting features into one head pathway."""

    def __init__(self, channels):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 1, bias=False)
        self.bn = nn.BatchNorm2d(channels)

    def forward(self, x):
        return self.bn(self.conv(x))


class _Tower(nn.Module):
    """Two-layer conv tower mapping correlation output to prediction channels."""

    def __init__(self, channels, out_channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, out_channels, 1)

    def forward(self, x):
        return self.conv2(F.relu(self.bn1(self.conv1(x))))


class BoxAdaptiveHead(nn.Module):
    """Classification (2ch) and regression (4ch) maps from template/search
    features via depthwise cross-correlation; regression passes through exp
    so every output is strictly positive.
    """

    def __init__(self, channels):
        super().__init__()
        self.adjust_z_cls = _Adjust(channels)
        self.adjust_x_cls = _Adjust(channels)
        self.adjust_z_reg = _Adjust(channels)
        self.adjust_x_reg = _Adjust(channels)
        self.cls_tower = _Tower(channels, 2)
        self.reg_tower = _Tower(channels, 4)
        # start decoded side distances near the typical target scale (~32 px
        # in the search patch) so the IoU loss sees overlap from step one
        nn.init.constant_(self.reg_tower.conv2.bias, math.log(32.0))

    def forward(self, z_feat, x_feat):
        cls_corr = xcorr_depthwise(self.adjust_x_cls(x_feat),
                                   self.adjust_z_cls(z_feat))
        reg_corr = xcorr_depthwise(self.adjust_x_reg(x_feat),
                                   self.adjust_z_reg(z_feat))
        cls = self.cls_tower(cls_corr)
        reg = torch.exp(self.reg_tower(reg_corr))
        return cls, reg


class FusionWeights(nn.Module):
    """Free per-level scalars, softmax-normalized into convex weights."""

    def __init__(self, levels):
        super().__init__()
        self.levels = tuple(levels)
        self.cls_logits = nn.Parameter(torch.zeros(len(self.levels)))
        self.reg_logits = nn.Parameter(torch.zeros(len(self.levels)))

    def cls_weights(self):
        return torch.softmax(self.cls_logits, dim=0)

    def reg_weights(self):
        return torch.softmax(self.reg_logits, dim=0)


def fuse_levels(outputs, weights: FusionWeights):
    """Weighted sum of per-level (cls, reg) maps with normalized weights."""
    if not outputs:
        raise ValueError("no level outputs to fuse")
    missing = [l for l in weights.levels if l not in outputs]
    if missing:
        raise ValueError(f"missing head outputs for levels {missing}")
    w_cls = weights.cls_weights()
    w_reg = weights.reg_weights()
    cls = sum(w_cls[k] * outputs[level][0]
              for k, level in enumerate(weights.levels))
    reg = sum(w_reg[k] * outputs[level][1]
              for k, level in enumerate(weights.levels))
    return cls, reg
