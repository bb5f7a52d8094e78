"""Siamese feature-extraction backbones.

Both variants reach total stride 8 and emit multi-level features at a shared
spatial resolution: a 255x255 search patch maps to 31x31, a 127x127 template
patch to 15x15 (center-cropped to 7x7 downstream).
"""

from __future__ import annotations

import torch
import torch.nn as nn


class TinyBackbone(nn.Module):
    """Small stride-8 convnet for tests and desk-scale training.

    A patchify stem reaches stride 8 in one step (255 -> 31, 127 -> 15),
    then per-level dilated 3x3 blocks mimic the receptive-field spread of
    the deep variant.
    """

    def __init__(self, levels=("l3", "l4", "l5"), width=32):
        super().__init__()
        self.levels = tuple(levels)
        self.width = width
        self.stem = nn.Sequential(
            nn.Conv2d(3, width, kernel_size=8, stride=8, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(inplace=True),
        )
        dilations = {"l3": 1, "l4": 2, "l5": 4}
        self.blocks = nn.ModuleDict()
        for level in ("l3", "l4", "l5"):
            d = dilations[level]
            self.blocks[level] = nn.Sequential(
                nn.Conv2d(width, width, kernel_size=3, padding=d, dilation=d,
                          bias=False),
                nn.BatchNorm2d(width),
                nn.ReLU(inplace=True),
            )
            if level == max(self.levels):
                break

    @property
    def out_channels(self):
        return {level: self.width for level in self.levels}

    def freeze_stages(self, n):
        """Freeze the first n stages (stem counts as stage 1)."""
        stages = [self.stem] + [self.blocks[k] for k in sorted(self.blocks)]
        for stage in stages[:n]:
            for p in stage.parameters():
                p.requires_grad_(False)
            stage.eval()

    def forward(self, x):
        x = self.stem(x)
        out = {}
        for level in ("l3", "l4", "l5"):
            if level not in self.blocks:
                break
            x = self.blocks[level](x)
            if level in self.levels:
                out[level] = x
        return out


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, inplanes, planes, stride=1, dilation=1, downsample=None):
        super().__init__()
        self.conv1 = nn.Conv2d(inplanes, planes, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride=stride,
                               padding=dilation, dilation=dilation, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.conv3 = nn.Conv2d(planes, planes * self.expansion, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(planes * self.expansion)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = downsample

    def forward(self, x):
        identity = x
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        if self.downsample is not None:
            identity = self.downsample(x)
        return self.relu(out + identity)


class ResNet50Atrous(nn.Module):
    """ResNet-50 with downsampling removed from the last two stages.

    Stage 4 keeps stride 1 with atrous rate 2, stage 5 stride 1 with rate 4.
    Unpadded stem convs make the search path land exactly on 31x31.
    """

    def __init__(self, levels=("l3", "l4", "l5")):
        super().__init__()
        self.levels = tuple(levels)
        self.inplanes = 64
        self.conv1 = nn.Conv2d(3, 64, 7, stride=2, padding=0, bias=False)
        self.bn1 = nn.BatchNorm2d(64)
        self.relu = nn.ReLU(inplace=True)
        self.maxpool = nn.MaxPool2d(3, stride=2, padding=0)
        self.layer1 = self._make_layer(64, 3)
        self.layer2 = self._make_layer(128, 4, stride=2)
        self.layer3 = self._make_layer(256, 6, dilation=2)
        self.layer4 = self._make_layer(512, 3, dilation=4)

    def _make_layer(self, planes, blocks, stride=1, dilation=1):
        downsample = None
        if stride != 1 or self.inplanes != planes * Bottleneck.expansion:
            downsample = nn.Sequential(
                nn.Conv2d(self.inplanes, planes * Bottleneck.expansion, 1,
                          stride=stride, bias=False),
                nn.BatchNorm2d(planes * Bottleneck.expansion),
            )
        layers = [Bottleneck(self.inplanes, planes, stride, dilation, downsample)]
        self.inplanes = planes * Bottleneck.expansion
        for _ in range(1, blocks):
            layers.append(Bottleneck(self.inplanes, planes, dilation=dilation))
        return nn.Sequential(*layers)

    @property
    def out_channels(self):
        chans = {"l3": 512, "l4": 1024, "l5": 2048}
        return {level: chans[level] for level in self.levels}

    def freeze_stages(self, n):
        """Freeze the first n stages (stem counts as stage 1, layer1 as 2, ...)."""
        stages = [nn.Sequential(self.conv1, self.bn1),
                  self.layer1, self.layer2, self.layer3, self.layer4]
        for stage in stages[:n]:
            for p in stage.parameters():
                p.requires_grad_(False)
            stage.eval()

    def forward(self, x):
        x = self.relu(self.bn1(self.conv1(x)))
        x = self.maxpool(x)
        x = self.layer1(x)
        x = self.layer2(x)
        out = {}
        if "l3" in self.levels:
            out["l3"] = x
        x = self.layer3(x)
        if "l4" in self.levels:
            out["l4"] = x
        if "l5" in self.levels:
            out["l5"] = self.layer4(x)
        return out


def build_backbone(variant, levels, tiny_width=32):
    if variant == "tiny":
        return TinyBackbone(levels=levels, width=tiny_width)
    if variant == "resnet50_atrous":
        return ResNet50Atrous(levels=levels)
    raise ValueError(f"unknown backbone variant {variant!r}")
