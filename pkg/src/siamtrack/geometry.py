"""Boxes, grid-to-image mapping, regression target encoding and IoU."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in image pixels, corner form."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(
                "degenerate box: need x1 < x2 and y1 < y2, got "
                f"({self.x1}, {self.y1}, {self.x2}, {self.y2})")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def center(self):
        return (self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0

    @classmethod
    def from_cxywh(cls, cx, cy, w, h):
        return cls(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)

    @classmethod
    def from_xywh(cls, x, y, w, h):
        return cls(x, y, x + w, y + h)

    def to_xywh(self):
        return self.x1, self.y1, self.width, self.height

    @classmethod
    def parse_line(cls, line: str) -> "Box":
        """Parse a comma-separated 'x,y,w,h' ground-truth line."""
        parts = line.strip().split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 4 comma-separated values, got: {line!r}")
        x, y, w, h = (float(p) for p in parts)
        return cls.from_xywh(x, y, w, h)

    def format_line(self) -> str:
        x, y, w, h = self.to_xywh()
        return f"{x:.4f},{y:.4f},{w:.4f},{h:.4f}"


@dataclass(frozen=True)
class GridSpec:
    """Correlation-map geometry: w x h cells at stride s over an im_w x im_h patch."""

    w: int
    h: int
    s: int
    im_w: int
    im_h: int

    def __post_init__(self):
        if self.s < 1 or self.w < 1 or self.h < 1:
            raise ValueError("grid spec needs s >= 1 and w, h >= 1")


def map_grid_to_image(i, j, spec: GridSpec):
    """Map a grid cell (i, j) to the center of its receptive field on the patch."""
    if not (0 <= i < spec.w and 0 <= j < spec.h):
        raise ValueError(f"grid index ({i}, {j}) outside {spec.w}x{spec.h}")
    p_i = spec.im_w // 2 + (i - spec.w // 2) * spec.s
    p_j = spec.im_h // 2 + (j - spec.h // 2) * spec.s
    return float(p_i), float(p_j)


def grid_points(spec: GridSpec):
    """All mapped image points as arrays px, py of shape (h, w).

    px[j, i], py[j, i] correspond to grid cell (i, j).
    """
    ii = np.arange(spec.w)
    jj = np.arange(spec.h)
    px = spec.im_w // 2 + (ii - spec.w // 2) * spec.s
    py = spec.im_h // 2 + (jj - spec.h // 2) * spec.s
    px, py = np.meshgrid(px, py)
    return px.astype(np.float64), py.astype(np.float64)


def encode_targets(p, gt: Box):
    """Distances (d_l, d_t, d_r, d_b) from point p to the four box sides.

    Only points strictly inside the box are valid targets.
    """
    p_i, p_j = p
    d_l = p_i - gt.x1
    d_t = p_j - gt.y1
    d_r = gt.x2 - p_i
    d_b = gt.y2 - p_j
    if min(d_l, d_t, d_r, d_b) <= 0:
        raise ValueError(f"point {p} not strictly inside box {gt}")
    return d_l, d_t, d_r, d_b


def decode_box(p, d) -> Box:
    """Invert encode_targets: build the box whose side distances from p are d."""
    d_l, d_t, d_r, d_b = d
    if min(d_l, d_t, d_r, d_b) <= 0:
        raise ValueError(f"non-positive side distances {d}")
    p_i, p_j = p
    return Box(p_i - d_l, p_j - d_t, p_i + d_r, p_j + d_b)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.width * a.height + b.width * b.height - inter
    return inter / union
